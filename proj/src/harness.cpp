#include "posedp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "posedp/adam.hpp"
#include "posedp/binary_io.hpp"

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace posedp {

namespace {

constexpr std::string_view kMagic{"PDPCKPT\0", 8};
constexpr float kRangeFloor = 1e-6f;
constexpr float kObsRangeFloor = 1e-4f;

// Tiny Adam moments otherwise underflow into subnormals, which slows the
// float pipeline by an order of magnitude and skews epoch timings.
class FlushSubnormals {
 public:
#if defined(__SSE__)
  FlushSubnormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~FlushSubnormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed ^ (stream * 0x9E3779B97F4A7C15ULL);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void write_params(BinaryWriter& w, const DenoiserParams& p) {
  w.u32(static_cast<std::uint32_t>(p.tensors().size()));
  for (const auto& t : p.tensors()) {
    w.text(t.name());
    w.floats(t.data());
  }
}

DenoiserParams read_params(BinaryReader& r, const DenoiserConfig& config) {
  DenoiserParams p = DenoiserParams::zeros(config);
  const auto count = r.u32();
  if (count != p.tensors().size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(count) +
                             " tensors, config implies " +
                             std::to_string(p.tensors().size()));
  }
  for (auto& t : p.tensors()) {
    const std::string name = r.text();
    if (name != t.name()) {
      throw std::runtime_error("checkpoint tensor '" + name + "' where '" +
                               t.name() + "' was expected");
    }
    const auto values = r.floats(t.numel(), name.c_str());
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
  }
  return p;
}

}  // namespace

double TrainingMetrics::mean_epoch_seconds() const {
  if (epoch_seconds.empty()) return 0.0;
  double total = 0.0;
  for (float s : epoch_seconds) total += s;
  return total / static_cast<double>(epoch_seconds.size());
}

const DenoiserParams& Checkpoint::policy_params() const {
  return ema && config.use_ema ? *ema : params;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  BinaryWriter w(out);
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.text(to_text(ck.config));
  w.u32(static_cast<std::uint32_t>(ck.params.config().hidden_width));
  write_params(w, ck.params);
  w.u32(ck.ema ? 1u : 0u);
  if (ck.ema) write_params(w, *ck.ema);
  w.floats(ck.action_min);
  w.floats(ck.action_max);
  w.floats(ck.obs_min);
  w.floats(ck.obs_max);
  w.floats(ck.metrics.epoch_loss);
  w.floats(ck.metrics.epoch_seconds);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  BinaryReader r(in);
  if (r.bytes(kMagic.size()) != kMagic) {
    throw std::runtime_error(path.string() + " is not a checkpoint file");
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config = parse_config(r.text());
  DenoiserConfig dcfg = ck.config.denoiser();
  dcfg.hidden_width = static_cast<int>(r.u32());
  ck.params = read_params(r, dcfg);
  if (r.u32() == 1u) ck.ema = read_params(r, dcfg);
  ck.action_min = r.floats(kActionDim, "action_min");
  ck.action_max = r.floats(kActionDim, "action_max");
  const auto frame_width = static_cast<std::size_t>(ck.config.frame_width());
  ck.obs_min = r.floats(frame_width, "obs_min");
  ck.obs_max = r.floats(frame_width, "obs_max");
  ck.metrics.epoch_loss = r.floats();
  ck.metrics.epoch_seconds = r.floats();
  return ck;
}

std::vector<float> encode_observation(ObservationMode mode,
                                      const std::vector<float>& robot_state,
                                      const std::vector<Pose>& poses,
                                      const GridImage* grid) {
  if (mode == ObservationMode::grid_image) {
    if (grid == nullptr) throw std::invalid_argument("grid observation without a render");
    std::vector<float> out(grid->pixels);
    out.insert(out.end(), robot_state.begin(), robot_state.end());
    return out;
  }
  return ObservationFrame{robot_state, poses}.encode();
}

std::vector<float> normalize_action(const Action& a, std::span<const float> lo,
                                    std::span<const float> hi) {
  std::vector<float> out(kActionDim);
  for (int d = 0; d < kActionDim; ++d) {
    const float range = std::max(hi[d] - lo[d], kRangeFloor);
    out[d] = 2.0f * (a[d] - lo[d]) / range - 1.0f;
  }
  return out;
}

std::vector<float> normalize_observation(std::span<const float> frame,
                                         std::span<const float> lo,
                                         std::span<const float> hi) {
  if (lo.size() != frame.size() || hi.size() != frame.size()) {
    throw std::invalid_argument("observation statistics have width " +
                                std::to_string(lo.size()) + ", frame has " +
                                std::to_string(frame.size()));
  }
  std::vector<float> out(frame.size());
  for (std::size_t d = 0; d < frame.size(); ++d) {
    const float range = hi[d] - lo[d];
    out[d] = range > kObsRangeFloor ? 2.0f * (frame[d] - lo[d]) / range - 1.0f
                                    : frame[d] - lo[d];
  }
  return out;
}

Action denormalize_action(std::span<const float> x, std::span<const float> lo,
                          std::span<const float> hi) {
  Action a{};
  for (int d = 0; d < kActionDim; ++d) {
    const float range = std::max(hi[d] - lo[d], kRangeFloor);
    a[d] = (x[d] + 1.0f) * 0.5f * range + lo[d];
  }
  return a;
}

TrainingSet build_training_set(const ExperimentConfig& cfg, const Dataset& data) {
  if (data.action_min.size() != kActionDim || data.action_max.size() != kActionDim) {
    throw std::invalid_argument("dataset is missing action statistics");
  }
  TrainingSet set;
  set.cond_width = static_cast<std::size_t>(cfg.obs_horizon * cfg.frame_width());
  set.chunk_width = static_cast<std::size_t>(cfg.prediction_horizon * kActionDim);
  std::vector<std::vector<std::vector<float>>> episodes;
  std::vector<std::vector<std::vector<float>>> episode_actions;
  for (const auto& ep : data.episodes) {
    std::vector<std::vector<float>> encoded;
    std::vector<std::vector<float>> actions;
    for (const auto& f : ep.frames) {
      const auto& poses = cfg.mode == ObservationMode::est_pose ? f.est_poses : f.gt_poses;
      encoded.push_back(encode_observation(cfg.mode, f.robot_state, poses, &f.grid));
      actions.push_back(normalize_action(f.action, data.action_min, data.action_max));
    }
    episodes.push_back(std::move(encoded));
    episode_actions.push_back(std::move(actions));
  }
  const auto width = static_cast<std::size_t>(cfg.frame_width());
  set.obs_min.assign(width, std::numeric_limits<float>::infinity());
  set.obs_max.assign(width, -std::numeric_limits<float>::infinity());
  for (const auto& ep : episodes) {
    for (const auto& f : ep) {
      if (f.size() != width) {
        throw std::invalid_argument("observation width " + std::to_string(f.size()) +
                                    " does not match config frame width " +
                                    std::to_string(width));
      }
      for (std::size_t d = 0; d < width; ++d) {
        set.obs_min[d] = std::min(set.obs_min[d], f[d]);
        set.obs_max[d] = std::max(set.obs_max[d], f[d]);
      }
    }
  }
  if (cfg.mode == ObservationMode::grid_image) {
    // Pixels pass through unchanged (a zero range only shifts by lo = 0);
    // only proprio gets dataset statistics.
    const auto pixels = static_cast<std::size_t>(cfg.grid_resolution * cfg.grid_resolution);
    std::fill_n(set.obs_min.begin(), pixels, 0.0f);
    std::fill_n(set.obs_max.begin(), pixels, 0.0f);
  }
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    std::vector<std::vector<float>> encoded;
    for (const auto& f : episodes[e]) {
      encoded.push_back(normalize_observation(f, set.obs_min, set.obs_max));
    }
    const auto& actions = episode_actions[e];
    const std::size_t frames = encoded.size();
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t first =
          t + 1 >= static_cast<std::size_t>(cfg.obs_horizon) ? t + 1 - static_cast<std::size_t>(cfg.obs_horizon) : 0;
      const auto window = assemble_window(
          std::span<const std::vector<float>>(encoded).subspan(first, t + 1 - first),
          cfg.obs_horizon);
      if (window.size() != set.cond_width) {
        throw std::invalid_argument("observation width " + std::to_string(window.size()) +
                                    " does not match config width " +
                                    std::to_string(set.cond_width));
      }
      set.conditions.insert(set.conditions.end(), window.begin(), window.end());
      for (int h = 0; h < cfg.prediction_horizon; ++h) {
        const auto& a = actions[std::min(t + static_cast<std::size_t>(h), frames - 1)];
        set.chunks.insert(set.chunks.end(), a.begin(), a.end());
      }
    }
  }
  if (set.size() == 0) throw std::invalid_argument("dataset has no frames");
  return set;
}

Checkpoint train(const ExperimentConfig& cfg, const Dataset& data,
                 const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.task.id != cfg.task.id || data.task.objects != cfg.task.objects) {
    throw std::invalid_argument("dataset task " + data.task.name() +
                                " does not match config task " + cfg.task.name());
  }
  const FlushSubnormals flush;
  const TrainingSet set = build_training_set(cfg, data);
  const DenoiserConfig dcfg = cfg.denoiser();
  if (static_cast<std::size_t>(dcfg.cond_width()) != set.cond_width) {
    throw std::invalid_argument("denoiser condition width " +
                                std::to_string(dcfg.cond_width()) +
                                " does not match encoded observations " +
                                std::to_string(set.cond_width));
  }
  const NoiseSchedule schedule = cfg.schedule();

  Checkpoint ck;
  ck.config = cfg;
  ck.params = DenoiserParams::initialize(dcfg, cfg.train_seed);
  if (cfg.use_ema) ck.ema = ck.params.clone();
  ck.action_min = data.action_min;
  ck.action_max = data.action_max;
  ck.obs_min = set.obs_min;
  ck.obs_max = set.obs_max;

  Adam adam(ck.params.tensors(), AdamOptions{cfg.learning_rate});
  Rng rng(mix_seed(cfg.train_seed, 1));
  const DenoiserParams& params = ck.params;
  const BatchEpsPredictor predictor = [&params](Tape* tape, const Tensor& x,
                                                std::span<const int> steps,
                                                const Tensor& cond) {
    return predict_noise(params, x, steps, cond, tape);
  };

  const std::size_t n = set.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += batch) {
      const std::size_t rows = std::min(batch, n - b0);
      std::vector<float> x0(rows * set.chunk_width);
      std::vector<float> cond(rows * set.cond_width);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t src = order[b0 + r];
        std::copy_n(set.chunks.begin() + static_cast<std::ptrdiff_t>(src * set.chunk_width),
                    set.chunk_width, x0.begin() + static_cast<std::ptrdiff_t>(r * set.chunk_width));
        std::copy_n(set.conditions.begin() + static_cast<std::ptrdiff_t>(src * set.cond_width),
                    set.cond_width, cond.begin() + static_cast<std::ptrdiff_t>(r * set.cond_width));
      }
      Tape tape;
      adam.zero_grad();
      float loss = 0.0f;
      try {
        loss = training_loss(predictor,
                             Tensor::from_data({rows, set.chunk_width}, std::move(x0)),
                             Tensor::from_data({rows, set.cond_width}, std::move(cond)),
                             schedule, rng, &tape);
        adam.step();
      } catch (const std::exception& e) {
        throw std::runtime_error("training aborted at epoch " + std::to_string(epoch + 1) +
                                 ", step " + std::to_string(batches + 1) + ": " + e.what());
      }
      if (ck.ema) ck.ema->blend_towards(ck.params, cfg.ema_decay);
      loss_sum += loss;
      ++batches;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto mean_loss = static_cast<float>(loss_sum / static_cast<double>(batches));
    ck.metrics.epoch_loss.push_back(mean_loss);
    ck.metrics.epoch_seconds.push_back(static_cast<float>(seconds));
    if (on_epoch) on_epoch(epoch + 1, mean_loss, seconds);
  }
  return ck;
}

EpisodeReport rollout(const Checkpoint& ck, const TaskSpec& spec,
                      const TrackerConfig& tracker_cfg, std::uint64_t seed) {
  const FlushSubnormals flush;
  const ExperimentConfig& cfg = ck.config;
  if (spec.id != cfg.task.id || spec.objects != cfg.task.objects) {
    throw std::invalid_argument("checkpoint was trained on " + cfg.task.name() +
                                ", not " + spec.name());
  }
  const DenoiserParams& params = ck.policy_params();
  const DenoiserConfig& dcfg = params.config();
  const NoiseSchedule schedule = cfg.schedule();
  TrackerConfig tracker = tracker_cfg;
  if (tracker.first_visible_frames.empty()) {
    tracker.first_visible_frames.assign(static_cast<std::size_t>(spec.objects), spec.reveal_frame);
  }

  EpisodeReport report;
  report.seed = seed;
  Rng sample_rng(mix_seed(seed, 11));
  Rng tracker_rng(mix_seed(seed, 12));
  std::vector<PoseTracker> trackers;
  if (cfg.mode == ObservationMode::est_pose) {
    for (int i = 0; i < spec.objects; ++i) {
      trackers.emplace_back(tracker, static_cast<std::size_t>(i));
    }
  }

  WorldState state = reset(spec, seed);
  std::deque<std::vector<float>> history;
  auto observe = [&]() {
    const auto proprio = robot_state(state);
    std::vector<float> frame;
    switch (cfg.mode) {
      case ObservationMode::gt_pose:
        frame = encode_observation(cfg.mode, proprio, state.objects, nullptr);
        break;
      case ObservationMode::est_pose: {
        std::vector<Pose> est;
        for (std::size_t i = 0; i < trackers.size(); ++i) {
          est.push_back(trackers[i].observe(state.frame(), state.objects[i], tracker_rng));
          if (!est.back().valid) continue;
          const auto& gt = state.objects[i];
          double sq = 0.0;
          for (int a = 0; a < 3; ++a) {
            const double d = est.back().translation[a] - gt.translation[a];
            sq += d * d;
          }
          report.position_errors.push_back(std::sqrt(sq));
          report.orientation_errors.push_back(
              quat_angular_distance(est.back().rotation, gt.rotation));
        }
        frame = encode_observation(cfg.mode, proprio, est, nullptr);
        break;
      }
      case ObservationMode::grid_image: {
        const GridImage grid = render_grid(state, cfg.grid_resolution);
        frame = encode_observation(cfg.mode, proprio, {}, &grid);
        break;
      }
    }
    history.push_back(normalize_observation(frame, ck.obs_min, ck.obs_max));
    while (history.size() > static_cast<std::size_t>(cfg.obs_horizon)) history.pop_front();
  };

  const auto chunk_width = static_cast<std::size_t>(dcfg.chunk_width());
  const EpsPredictor predictor = [&](std::span<const float> x, int k,
                                     std::span<const float> cond) {
    const Tensor xt = Tensor::from_data({1, chunk_width}, std::vector<float>(x.begin(), x.end()));
    const Tensor ct = Tensor::from_data({1, cond.size()}, std::vector<float>(cond.begin(), cond.end()));
    const int steps[1] = {k};
    const Tensor eps = predict_noise(params, xt, steps, ct);
    return std::vector<float>(eps.data().begin(), eps.data().end());
  };

  observe();
  while (!report.success && state.step < spec.max_steps) {
    const std::vector<std::vector<float>> frames(history.begin(), history.end());
    const auto cond = assemble_window(frames, cfg.obs_horizon);
    std::optional<ActionChunk> chunk;
    try {
      chunk = ddpm_sample(predictor, cond, dcfg.horizon, dcfg.action_dim, schedule, sample_rng);
    } catch (const std::exception& e) {
      report.diagnostic = e.what();
      break;
    }
    ++report.sampler_calls;
    int executed = 0;
    for (int i = 0; i < cfg.action_horizon; ++i) {
      const Action action = denormalize_action(chunk->row(i), ck.action_min, ck.action_max);
      state = step(state, action, spec);
      ++executed;
      if (success(state, spec)) {
        report.success = true;
        break;
      }
      if (state.step >= spec.max_steps) break;
      observe();
    }
    report.steps_per_plan.push_back(executed);
  }
  report.steps = state.step;
  return report;
}

double EvaluationResult::mean_position_error() const {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& e : episodes) {
    for (double v : e.position_errors) total += v;
    n += e.position_errors.size();
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

double EvaluationResult::mean_orientation_error() const {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& e : episodes) {
    for (double v : e.orientation_errors) total += v;
    n += e.orientation_errors.size();
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

EvaluationResult evaluate(const EpisodeRunner& runner, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("evaluate: n must be >= 1");
  EvaluationResult result;
  int successes = 0;
  for (int i = 0; i < n; ++i) {
    result.episodes.push_back(runner(seed + static_cast<std::uint64_t>(i)));
    if (result.episodes.back().success) ++successes;
  }
  result.success_rate = static_cast<double>(successes) / n;
  return result;
}

EvaluationResult evaluate(const Checkpoint& ck, const TaskSpec& spec,
                          const TrackerConfig& tracker, int n,
                          std::uint64_t seed) {
  return evaluate([&](std::uint64_t s) { return rollout(ck, spec, tracker, s); }, n, seed);
}

}  // namespace posedp
