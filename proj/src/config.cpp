#include "posedp/config.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace posedp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) {
    throw std::invalid_argument("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw std::invalid_argument("config key '" + key + "': expected boolean, got '" + value + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string format_offsets(const std::vector<Quaternion>& offsets) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (i) out << "; ";
    out << offsets[i].w << ' ' << offsets[i].x << ' ' << offsets[i].y << ' ' << offsets[i].z;
  }
  return out.str();
}

std::vector<Quaternion> parse_offsets(const std::string& key, const std::string& value) {
  std::vector<Quaternion> out;
  for (const auto& item : split(value, ';')) {
    std::istringstream in(item);
    Quaternion q;
    in >> q.w >> q.x >> q.y >> q.z;
    if (in.fail()) {
      throw std::invalid_argument("config key '" + key + "': bad quaternion '" + item + "'");
    }
    out.push_back(q);
  }
  return out;
}

}  // namespace

std::string to_string(ObservationMode mode) {
  switch (mode) {
    case ObservationMode::gt_pose: return "gt_pose";
    case ObservationMode::est_pose: return "est_pose";
    case ObservationMode::grid_image: return "grid_image";
  }
  return "unknown";
}

ObservationMode mode_from_string(const std::string& name) {
  if (name == "gt_pose") return ObservationMode::gt_pose;
  if (name == "est_pose") return ObservationMode::est_pose;
  if (name == "grid_image") return ObservationMode::grid_image;
  throw std::invalid_argument("unknown observation mode '" + name + "'");
}

int ExperimentConfig::frame_width() const {
  if (mode == ObservationMode::grid_image) {
    return grid_resolution * grid_resolution + kRobotStateDim;
  }
  return kRobotStateDim + static_cast<int>(kPoseEncodingWidth) * task.objects;
}

DenoiserConfig ExperimentConfig::denoiser() const {
  DenoiserConfig c;
  c.hidden_width = hidden_width;
  c.depth = depth;
  c.embed_dim = embed_dim;
  c.action_dim = kActionDim;
  c.horizon = prediction_horizon;
  c.obs_dim = frame_width();
  c.obs_horizon = obs_horizon;
  if (param_budget > 0) c.hidden_width = hidden_width_for_budget(c, param_budget);
  return c;
}

NoiseSchedule ExperimentConfig::schedule() const {
  return NoiseSchedule::linear(diffusion_steps, beta_start, beta_end);
}

TrackerConfig ExperimentConfig::effective_tracker() const {
  TrackerConfig t = tracker;
  if (t.first_visible_frames.empty()) {
    t.first_visible_frames.assign(static_cast<std::size_t>(task.objects), task.reveal_frame);
  }
  // One offset per object; extra objects reuse the last configured offset.
  const auto objects = static_cast<std::size_t>(task.objects);
  if (!t.canonical_offsets.empty() && t.canonical_offsets.size() < objects) {
    t.canonical_offsets.resize(objects, t.canonical_offsets.back());
  }
  return t;
}

void ExperimentConfig::validate() const {
  task.validate();
  tracker.validate();
  if (obs_horizon < 1) throw std::invalid_argument("config: obs.horizon must be >= 1");
  if (action_horizon < 1 || action_horizon > prediction_horizon) {
    throw std::invalid_argument("config: need 1 <= policy.action_horizon <= policy.prediction_horizon");
  }
  if (epochs < 1 || batch_size < 1) throw std::invalid_argument("config: epochs and batch size must be >= 1");
  if (demo_episodes < 1 || eval_rollouts < 1) {
    throw std::invalid_argument("config: episode counts must be >= 1");
  }
  if (!(ema_decay >= 0.0f && ema_decay < 1.0f)) {
    throw std::invalid_argument("config: train.ema_decay must be in [0, 1)");
  }
  denoiser().validate();
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(number) +
                                  ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(number) + ": empty key");
    }
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig cfg) {
  auto kv = parse_key_values(text);
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  if (auto v = take("task.id")) {
    const int reveal = cfg.task.reveal_frame;
    cfg.task = TaskSpec::named(*v, 1);
    if (reveal > 1 && cfg.task.id == TaskId::push_to_goal) {
      cfg.task = TaskSpec::late_reveal_push(reveal);
    }
  }
  if (auto v = take("task.reveal_frame")) {
    const int reveal = parse_number<int>("task.reveal_frame", *v);
    cfg.task = TaskSpec::named(to_string(cfg.task.id), reveal);
  }
  if (auto v = take("task.max_steps")) cfg.task.max_steps = parse_number<int>("task.max_steps", *v);

  if (auto v = take("obs.mode")) cfg.mode = mode_from_string(*v);
  if (auto v = take("obs.horizon")) cfg.obs_horizon = parse_number<int>("obs.horizon", *v);
  if (auto v = take("obs.grid_resolution")) {
    cfg.grid_resolution = parse_number<int>("obs.grid_resolution", *v);
  }
  if (auto v = take("policy.prediction_horizon")) {
    cfg.prediction_horizon = parse_number<int>("policy.prediction_horizon", *v);
  }
  if (auto v = take("policy.action_horizon")) {
    cfg.action_horizon = parse_number<int>("policy.action_horizon", *v);
  }
  if (auto v = take("model.hidden_width")) cfg.hidden_width = parse_number<int>("model.hidden_width", *v);
  if (auto v = take("model.depth")) cfg.depth = parse_number<int>("model.depth", *v);
  if (auto v = take("model.embed_dim")) cfg.embed_dim = parse_number<int>("model.embed_dim", *v);
  if (auto v = take("model.param_budget")) {
    cfg.param_budget = parse_number<std::size_t>("model.param_budget", *v);
  }
  if (auto v = take("diffusion.steps")) cfg.diffusion_steps = parse_number<int>("diffusion.steps", *v);
  if (auto v = take("diffusion.beta_start")) cfg.beta_start = parse_number<double>("diffusion.beta_start", *v);
  if (auto v = take("diffusion.beta_end")) cfg.beta_end = parse_number<double>("diffusion.beta_end", *v);
  if (auto v = take("train.epochs")) cfg.epochs = parse_number<int>("train.epochs", *v);
  if (auto v = take("train.batch_size")) cfg.batch_size = parse_number<int>("train.batch_size", *v);
  if (auto v = take("train.learning_rate")) {
    cfg.learning_rate = parse_number<float>("train.learning_rate", *v);
  }
  if (auto v = take("train.ema_decay")) cfg.ema_decay = parse_number<float>("train.ema_decay", *v);
  if (auto v = take("train.use_ema")) cfg.use_ema = parse_bool("train.use_ema", *v);
  if (auto v = take("data.episodes")) cfg.demo_episodes = parse_number<int>("data.episodes", *v);
  if (auto v = take("seed.data")) cfg.data_seed = parse_number<std::uint64_t>("seed.data", *v);
  if (auto v = take("seed.train")) cfg.train_seed = parse_number<std::uint64_t>("seed.train", *v);
  if (auto v = take("seed.eval")) cfg.eval_seed = parse_number<std::uint64_t>("seed.eval", *v);
  if (auto v = take("eval.rollouts")) cfg.eval_rollouts = parse_number<int>("eval.rollouts", *v);

  if (auto v = take("tracker.sigma_pos")) cfg.tracker.sigma_pos = parse_number<double>("tracker.sigma_pos", *v);
  if (auto v = take("tracker.sigma_rot")) cfg.tracker.sigma_rot = parse_number<double>("tracker.sigma_rot", *v);
  if (auto v = take("tracker.extra_noise")) {
    cfg.tracker.estimation_extra_noise = parse_number<double>("tracker.extra_noise", *v);
  }
  if (auto v = take("tracker.offset_angle")) {
    const double angle = parse_number<double>("tracker.offset_angle", *v);
    cfg.tracker.canonical_offsets.assign(
        static_cast<std::size_t>(cfg.task.objects),
        Quaternion::from_axis_angle({0.0, 0.0, 1.0}, angle));
  }
  if (auto v = take("tracker.offsets")) cfg.tracker.canonical_offsets = parse_offsets("tracker.offsets", *v);
  if (auto v = take("tracker.first_visible")) {
    cfg.tracker.first_visible_frames.clear();
    for (const auto& item : split(*v, ',')) {
      cfg.tracker.first_visible_frames.push_back(parse_number<int>("tracker.first_visible", item));
    }
  }
  if (!kv.empty()) {
    throw std::invalid_argument("unknown config key '" + kv.begin()->first + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "task.id = " << to_string(c.task.id) << '\n'
      << "task.reveal_frame = " << c.task.reveal_frame << '\n'
      << "task.max_steps = " << c.task.max_steps << '\n'
      << "obs.mode = " << to_string(c.mode) << '\n'
      << "obs.horizon = " << c.obs_horizon << '\n'
      << "obs.grid_resolution = " << c.grid_resolution << '\n'
      << "policy.prediction_horizon = " << c.prediction_horizon << '\n'
      << "policy.action_horizon = " << c.action_horizon << '\n'
      << "model.hidden_width = " << c.hidden_width << '\n'
      << "model.depth = " << c.depth << '\n'
      << "model.embed_dim = " << c.embed_dim << '\n'
      << "model.param_budget = " << c.param_budget << '\n'
      << "diffusion.steps = " << c.diffusion_steps << '\n'
      << "diffusion.beta_start = " << format_double(c.beta_start) << '\n'
      << "diffusion.beta_end = " << format_double(c.beta_end) << '\n'
      << "train.epochs = " << c.epochs << '\n'
      << "train.batch_size = " << c.batch_size << '\n'
      << "train.learning_rate = " << std::setprecision(9) << c.learning_rate << '\n'
      << "train.ema_decay = " << std::setprecision(9) << c.ema_decay << '\n'
      << "train.use_ema = " << (c.use_ema ? "true" : "false") << '\n'
      << "data.episodes = " << c.demo_episodes << '\n'
      << "seed.data = " << c.data_seed << '\n'
      << "seed.train = " << c.train_seed << '\n'
      << "seed.eval = " << c.eval_seed << '\n'
      << "eval.rollouts = " << c.eval_rollouts << '\n'
      << "tracker.sigma_pos = " << format_double(c.tracker.sigma_pos) << '\n'
      << "tracker.sigma_rot = " << format_double(c.tracker.sigma_rot) << '\n'
      << "tracker.extra_noise = " << format_double(c.tracker.estimation_extra_noise) << '\n'
      << "tracker.offsets = " << format_offsets(c.tracker.canonical_offsets) << '\n';
  out << "tracker.first_visible = ";
  for (std::size_t i = 0; i < c.tracker.first_visible_frames.size(); ++i) {
    if (i) out << ',';
    out << c.tracker.first_visible_frames[i];
  }
  out << '\n';
  return out.str();
}

}  // namespace posedp
