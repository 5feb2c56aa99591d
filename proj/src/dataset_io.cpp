#include "posedp/dataset_io.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

#include "posedp/binary_io.hpp"

namespace posedp {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic{"PDPDATA\0", 8};

json tracker_json(const TrackerConfig& t) {
  json offsets = json::array();
  for (const auto& q : t.canonical_offsets) offsets.push_back({q.w, q.x, q.y, q.z});
  return {{"sigma_pos", t.sigma_pos},
          {"sigma_rot", t.sigma_rot},
          {"estimation_extra_noise", t.estimation_extra_noise},
          {"canonical_offsets", offsets},
          {"first_visible_frames", t.first_visible_frames}};
}

TrackerConfig tracker_from_json(const json& j) {
  TrackerConfig t;
  t.sigma_pos = j.at("sigma_pos").get<double>();
  t.sigma_rot = j.at("sigma_rot").get<double>();
  t.estimation_extra_noise = j.at("estimation_extra_noise").get<double>();
  for (const auto& q : j.at("canonical_offsets")) {
    t.canonical_offsets.push_back({q.at(0).get<double>(), q.at(1).get<double>(),
                                   q.at(2).get<double>(), q.at(3).get<double>()});
  }
  t.first_visible_frames = j.at("first_visible_frames").get<std::vector<int>>();
  return t;
}

void write_poses(BinaryWriter& w, const std::vector<Pose>& poses) {
  std::vector<float> flat;
  for (const auto& p : poses) {
    const auto e = encode_pose(p);
    flat.insert(flat.end(), e.begin(), e.end());
  }
  w.floats(flat);
}

std::vector<Pose> read_poses(BinaryReader& r, int objects, const char* what) {
  const auto flat = r.floats(kPoseEncodingWidth * static_cast<std::size_t>(objects), what);
  std::vector<Pose> out;
  // Stored values are used as-is; renormalizing would perturb the last bit.
  for (int i = 0; i < objects; ++i) {
    const float* e = flat.data() + kPoseEncodingWidth * static_cast<std::size_t>(i);
    if (e[7] < 0.5f) {
      out.push_back(Pose::null());
      continue;
    }
    Pose p;
    p.translation = {e[0], e[1], e[2]};
    p.rotation = {e[3], e[4], e[5], e[6]};
    p.valid = true;
    out.push_back(p);
  }
  return out;
}

}  // namespace

std::string dataset_header_json(const Dataset& d) {
  json header = {
      {"format", "posedp-dataset"},
      {"version", kDatasetVersion},
      {"task", to_string(d.task.id)},
      {"reveal_frame", d.task.reveal_frame},
      {"max_steps", d.task.max_steps},
      {"objects", d.task.objects},
      {"robot_state_dim", kRobotStateDim},
      {"action_dim", kActionDim},
      {"grid_resolution", d.grid_resolution},
      {"tracker", tracker_json(d.tracker)},
      {"action_min", d.action_min},
      {"action_max", d.action_max},
      {"episodes", d.episodes.size()},
  };
  return header.dump();
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  BinaryWriter w(out);
  w.bytes(kMagic);
  w.u32(kDatasetVersion);
  const std::string header = dataset_header_json(d);
  w.text(header);
  w.u32(static_cast<std::uint32_t>(d.episodes.size()));
  for (const auto& ep : d.episodes) {
    w.u64(ep.seed);
    w.u32(static_cast<std::uint32_t>(ep.frames.size()));
    for (const auto& f : ep.frames) {
      w.floats(f.robot_state);
      write_poses(w, f.gt_poses);
      write_poses(w, f.est_poses);
      w.floats(f.grid.pixels);
      w.floats(f.action);
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());

  std::ofstream side(path.string() + ".jsonl");
  side << header << '\n';
  for (std::size_t i = 0; i < d.episodes.size(); ++i) {
    side << json{{"episode", i},
                 {"seed", d.episodes[i].seed},
                 {"frames", d.episodes[i].frames.size()}}
                .dump()
         << '\n';
  }
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  BinaryReader r(in);
  if (r.bytes(kMagic.size()) != kMagic) {
    throw std::runtime_error(path.string() + " is not a dataset file");
  }
  const auto version = r.u32();
  if (version != kDatasetVersion) {
    throw std::runtime_error("unsupported dataset version " + std::to_string(version));
  }
  const json header = json::parse(r.text());
  Dataset d;
  d.task = TaskSpec::named(header.at("task").get<std::string>(),
                           header.at("reveal_frame").get<int>());
  d.task.max_steps = header.at("max_steps").get<int>();
  d.grid_resolution = header.at("grid_resolution").get<int>();
  d.tracker = tracker_from_json(header.at("tracker"));
  d.action_min = header.at("action_min").get<std::vector<float>>();
  d.action_max = header.at("action_max").get<std::vector<float>>();
  const int objects = header.at("objects").get<int>();
  if (objects != d.task.objects) throw std::runtime_error("dataset object count mismatch");
  const auto pixels = static_cast<std::size_t>(d.grid_resolution * d.grid_resolution);

  const auto episodes = r.u32();
  d.episodes.resize(episodes);
  for (auto& ep : d.episodes) {
    ep.seed = r.u64();
    ep.frames.resize(r.u32());
    for (auto& f : ep.frames) {
      f.robot_state = r.floats(kRobotStateDim, "robot_state");
      f.gt_poses = read_poses(r, objects, "gt_poses");
      f.est_poses = read_poses(r, objects, "est_poses");
      f.grid.height = d.grid_resolution;
      f.grid.width = d.grid_resolution;
      f.grid.pixels = r.floats(pixels, "grid");
      const auto action = r.floats(kActionDim, "action");
      std::copy(action.begin(), action.end(), f.action.begin());
    }
  }
  return d;
}

}  // namespace posedp
