#include "posedp/env.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace posedp {

namespace {

std::atomic<std::uint64_t> g_renders{0};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

Vec2 xy(const Pose& p) { return {p.translation[0], p.translation[1]}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double norm(Vec2 a) { return std::sqrt(dot(a, a)); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

Vec2 unit_or(Vec2 a, Vec2 fallback) {
  const double n = norm(a);
  return n > 1e-12 ? (1.0 / n) * a : fallback;
}

double clamp_bound(double v) {
  return std::clamp(v, -kWorkspaceBound, kWorkspaceBound);
}

void set_xy(Pose& p, Vec2 v) {
  p.translation[0] = clamp_bound(v.x);
  p.translation[1] = clamp_bound(v.y);
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Velocity command toward `target`, saturating at unit norm.
std::array<double, 2> move_toward(Vec2 from, Vec2 target, double max_speed = 1.0) {
  Vec2 v = (1.0 / kMoveStep) * (target - from);
  const double n = norm(v);
  if (n > max_speed) v = (max_speed / n) * v;
  return {v.x, v.y};
}

Action make_action(std::array<double, 2> move, float grip, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, kExpertNoise);
  Action a{static_cast<float>(move[0] + noise(rng)),
           static_cast<float>(move[1] + noise(rng)),
           static_cast<float>(noise(rng)), grip};
  for (auto& v : a) v = std::clamp(v, -1.0f, 1.0f);
  return a;
}

Action reach_expert(const WorldState& s, std::mt19937_64& rng) {
  const Vec2 g = xy(s.gripper);
  const Vec2 target = xy(s.objects[0]);
  if (s.held == 0) return make_action({0.0, 0.0}, 1.0f, rng);
  if (s.closed) return make_action(move_toward(g, target), -1.0f, rng);
  // Close on the step that lands on the target.
  const float grip = distance(g, target) <= kMoveStep ? 1.0f : -1.0f;
  return make_action(move_toward(g, target), grip, rng);
}

Action push_expert(const WorldState& s, const TaskSpec& spec,
                   std::mt19937_64& rng) {
  const Vec2 g = xy(s.gripper);
  if (s.frame() < spec.reveal_frame) return make_action({0.0, 0.0}, -1.0f, rng);
  const Vec2 o = xy(s.objects[0]);
  const Vec2 goal{spec.goal[0], spec.goal[1]};
  if (s.held == 0) {
    const float grip = distance(g, goal) <= kMoveStep ? -1.0f : 1.0f;
    return make_action(move_toward(g, goal), grip, rng);
  }
  if (distance(o, goal) <= spec.success_radius) {
    return make_action({0.0, 0.0}, -1.0f, rng);
  }
  if (s.closed) return make_action(move_toward(g, o), -1.0f, rng);
  const float grip = distance(g, o) <= kMoveStep ? 1.0f : -1.0f;
  return make_action(move_toward(g, o), grip, rng);
}

Action stack_expert(const WorldState& s, std::mt19937_64& rng) {
  const Vec2 g = xy(s.gripper);
  const Vec2 a = xy(s.objects[0]);
  const Vec2 b = xy(s.objects[1]);
  if (s.held == 0) {
    const float grip = distance(g, b) <= kMoveStep ? -1.0f : 1.0f;
    return make_action(move_toward(g, b), grip, rng);
  }
  if (s.held == 1 || s.closed) return make_action(move_toward(g, a), -1.0f, rng);
  const float grip = distance(g, a) <= kMoveStep ? 1.0f : -1.0f;
  return make_action(move_toward(g, a), grip, rng);
}

// Solid core out to `radius`, then a linear falloff over `halo`.
float disc_coverage(double dist, double radius, double halo) {
  return static_cast<float>(std::clamp((radius + halo - dist) / halo, 0.0, 1.0));
}

}  // namespace

std::string to_string(TaskId id) {
  switch (id) {
    case TaskId::reach: return "reach";
    case TaskId::push_to_goal: return "push_to_goal";
    case TaskId::stack: return "stack";
  }
  return "unknown";
}

TaskId task_from_string(const std::string& name) {
  if (name == "reach") return TaskId::reach;
  if (name == "push_to_goal") return TaskId::push_to_goal;
  if (name == "stack") return TaskId::stack;
  throw std::invalid_argument("unknown task id '" + name + "'");
}

TaskSpec TaskSpec::reach() { return {TaskId::reach, 1, 120, 1, {0.45, 0.45}, 0.05}; }

TaskSpec TaskSpec::push_to_goal() {
  return {TaskId::push_to_goal, 1, 200, 1, {0.45, 0.45}, 0.07};
}

TaskSpec TaskSpec::stack() { return {TaskId::stack, 2, 200, 1, {0.45, 0.45}, 0.06}; }

TaskSpec TaskSpec::late_reveal_push(int reveal_frame) {
  TaskSpec s = push_to_goal();
  s.reveal_frame = reveal_frame;
  s.max_steps += reveal_frame;
  return s;
}

TaskSpec TaskSpec::named(const std::string& id, int reveal_frame) {
  switch (task_from_string(id)) {
    case TaskId::reach: {
      TaskSpec s = reach();
      s.reveal_frame = reveal_frame;
      return s;
    }
    case TaskId::push_to_goal:
      return reveal_frame > 1 ? late_reveal_push(reveal_frame) : push_to_goal();
    case TaskId::stack: {
      TaskSpec s = stack();
      s.reveal_frame = reveal_frame;
      return s;
    }
  }
  throw std::invalid_argument("unknown task");
}

std::string TaskSpec::name() const {
  return reveal_frame > 1 ? to_string(id) + "_late" : to_string(id);
}

void TaskSpec::validate() const {
  if (max_steps < 1) throw std::invalid_argument("task max_steps must be >= 1");
  if (reveal_frame < 1) throw std::invalid_argument("task reveal_frame must be >= 1");
  const int expected = id == TaskId::stack ? 2 : 1;
  if (objects != expected) {
    throw std::invalid_argument("task " + to_string(id) + " expects " +
                                std::to_string(expected) + " objects");
  }
}

std::vector<float> robot_state(const WorldState& s) {
  return {static_cast<float>(s.gripper.translation[0]),
          static_cast<float>(s.gripper.translation[1]),
          static_cast<float>(s.gripper.rotation.w),
          static_cast<float>(s.gripper.rotation.z),
          s.closed ? 1.0f : 0.0f,
          s.held >= 0 ? 1.0f : 0.0f};
}

WorldState reset(const TaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(splitmix(seed));
  std::uniform_real_distribution<double> coord(-kSpawnBound, kSpawnBound);
  std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
  const Vec2 goal{spec.goal[0], spec.goal[1]};
  const bool avoid_goal = spec.id == TaskId::push_to_goal;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    // Gripper first, then objects; all pairwise >= kMinSeparation.
    std::vector<Vec2> points;
    const auto count = static_cast<std::size_t>(spec.objects + 1);
    bool ok = true;
    while (points.size() < count && ok) {
      const Vec2 p{coord(rng), coord(rng)};
      for (const auto& q : points) ok = ok && distance(p, q) >= kMinSeparation;
      if (avoid_goal && !points.empty()) ok = ok && distance(p, goal) >= kMinSeparation;
      points.push_back(p);
    }
    if (!ok) continue;
    WorldState s;
    s.gripper = Pose::planar(points[0].x, points[0].y, yaw(rng));
    for (std::size_t i = 1; i < points.size(); ++i) {
      s.objects.push_back(Pose::planar(points[i].x, points[i].y, yaw(rng)));
    }
    return s;
  }
  throw std::runtime_error("reset: could not place objects with the required separation");
}

WorldState step(const WorldState& state, const Action& raw, const TaskSpec& spec) {
  Action a = raw;
  for (auto& v : a) {
    if (!std::isfinite(v)) throw std::invalid_argument("step: action is not finite");
    v = std::clamp(v, -1.0f, 1.0f);
  }
  WorldState s = state;
  const bool was_closed = s.closed;

  const Vec2 g0 = xy(s.gripper);
  const Vec2 g{clamp_bound(g0.x + kMoveStep * a[0]), clamp_bound(g0.y + kMoveStep * a[1])};
  const Quaternion turn = Quaternion::from_yaw(kYawStep * a[2]);
  s.gripper.translation = {g.x, g.y, 0.0};
  if (a[2] != 0.0f) s.gripper.rotation = quat_normalize(turn * s.gripper.rotation);
  if (a[3] > kGripDeadband) s.closed = true;
  if (a[3] < -kGripDeadband) s.closed = false;

  if (s.held >= 0) {
    auto& obj = s.objects[static_cast<std::size_t>(s.held)];
    set_xy(obj, g);
    if (a[2] != 0.0f) obj.rotation = quat_normalize(turn * obj.rotation);
    if (!s.closed) {
      if (spec.id == TaskId::stack && s.held == 0 &&
          distance(xy(s.objects[0]), xy(s.objects[1])) <= spec.success_radius) {
        s.on_top = true;
      }
      s.held = -1;
      s.lifted = false;
    }
  } else if (s.closed && !was_closed) {
    int best = -1;
    double best_dist = kGraspRadius;
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const double d = distance(g, xy(s.objects[i]));
      if (d <= best_dist) {
        best = static_cast<int>(i);
        best_dist = d;
      }
    }
    if (best >= 0) {
      s.held = best;
      s.lifted = true;
      s.on_top = false;
    }
  }

  if (s.closed && s.held < 0) {
    const double contact = kGripperRadius + kObjectRadius;
    const Vec2 motion = g - g0;
    for (auto& obj : s.objects) {
      const Vec2 rel = xy(obj) - g;
      const double d = norm(rel);
      if (d >= contact) continue;
      const Vec2 away = unit_or(rel, unit_or(motion, {1.0, 0.0}));
      set_xy(obj, g + contact * away);
    }
  }
  ++s.step;
  return s;
}

bool success(const WorldState& s, const TaskSpec& spec) {
  switch (spec.id) {
    case TaskId::reach:
      return s.held == 0 && s.closed && s.lifted &&
             distance(xy(s.gripper), xy(s.objects[0])) <= spec.success_radius;
    case TaskId::push_to_goal:
      return distance(xy(s.objects[0]), {spec.goal[0], spec.goal[1]}) <=
             spec.success_radius;
    case TaskId::stack:
      return s.on_top && s.held < 0 &&
             distance(xy(s.objects[0]), xy(s.objects[1])) <= spec.success_radius;
  }
  return false;
}

Action scripted_expert(const WorldState& state, const TaskSpec& spec,
                       std::mt19937_64& rng) {
  switch (spec.id) {
    case TaskId::reach: return reach_expert(state, rng);
    case TaskId::push_to_goal: return push_expert(state, spec, rng);
    case TaskId::stack: return stack_expert(state, rng);
  }
  return {};
}

GridImage render_grid(const WorldState& state, int resolution) {
  if (resolution < 8) throw std::invalid_argument("render_grid: resolution must be >= 8");
  g_renders.fetch_add(1, std::memory_order_relaxed);
  GridImage img = GridImage::filled(resolution, resolution, 0.0f);
  const double cell = 2.0 * kWorkspaceBound / resolution;
  struct Disc {
    Vec2 center;
    double radius;
    double halo;
    float level;
  };
  std::vector<Disc> discs;
  static constexpr float kObjectLevels[] = {1.0f, 0.75f};
  for (std::size_t i = 0; i < state.objects.size(); ++i) {
    discs.push_back({xy(state.objects[i]), kObjectRadius, kRenderHalo, kObjectLevels[i % 2]});
  }
  discs.push_back({xy(state.gripper), kGripperRadius, kRenderHalo, state.closed ? 0.3f : 0.45f});
  for (int r = 0; r < resolution; ++r) {
    const double py = kWorkspaceBound - (r + 0.5) * cell;
    for (int c = 0; c < resolution; ++c) {
      const double px = -kWorkspaceBound + (c + 0.5) * cell;
      float value = 0.0f;
      for (const auto& d : discs) {
        const float cover = disc_coverage(distance({px, py}, d.center), d.radius, d.halo);
        value = std::max(value, cover * d.level);
      }
      img.pixels[static_cast<std::size_t>(r * resolution + c)] = value;
    }
  }
  return img;
}

std::uint64_t render_count() { return g_renders.load(std::memory_order_relaxed); }

std::size_t Dataset::frame_count() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.frames.size();
  return n;
}

void compute_action_stats(Dataset& dataset) {
  dataset.action_min.assign(kActionDim, std::numeric_limits<float>::infinity());
  dataset.action_max.assign(kActionDim, -std::numeric_limits<float>::infinity());
  for (const auto& e : dataset.episodes) {
    for (const auto& f : e.frames) {
      for (int d = 0; d < kActionDim; ++d) {
        dataset.action_min[d] = std::min(dataset.action_min[d], f.action[d]);
        dataset.action_max[d] = std::max(dataset.action_max[d], f.action[d]);
      }
    }
  }
}

Dataset generate_demonstrations(const TaskSpec& spec, int episodes,
                                const TrackerConfig& tracker,
                                std::uint64_t seed, int grid_resolution) {
  if (episodes < 1) throw std::invalid_argument("generate_demonstrations: n must be >= 1");
  spec.validate();
  Dataset data;
  data.task = spec;
  data.tracker = tracker;
  if (data.tracker.first_visible_frames.empty()) {
    data.tracker.first_visible_frames.assign(static_cast<std::size_t>(spec.objects),
                                             spec.reveal_frame);
  }
  data.tracker.validate();
  data.grid_resolution = grid_resolution;

  int attempts = 0;
  int failures = 0;
  while (static_cast<int>(data.episodes.size()) < episodes) {
    const std::uint64_t episode_seed = splitmix(seed ^ splitmix(static_cast<std::uint64_t>(attempts)));
    ++attempts;
    std::mt19937_64 expert_rng(splitmix(episode_seed + 1));
    std::mt19937_64 tracker_rng(splitmix(episode_seed + 2));
    WorldState s = reset(spec, episode_seed);
    Episode ep;
    ep.seed = episode_seed;
    std::vector<std::vector<Pose>> gt(static_cast<std::size_t>(spec.objects));
    auto record = [&](const WorldState& st, const Action& action) {
      FrameRecord f;
      f.robot_state = robot_state(st);
      f.gt_poses = st.objects;
      f.grid = render_grid(st, grid_resolution);
      f.action = action;
      for (std::size_t i = 0; i < st.objects.size(); ++i) gt[i].push_back(st.objects[i]);
      ep.frames.push_back(std::move(f));
    };
    std::bernoulli_distribution fumble(kGripFumbleProbability);
    bool done = false;
    while (s.step < spec.max_steps) {
      const Action a = scripted_expert(s, spec, expert_rng);
      record(s, a);
      // The label stays the expert's command; only the executed gripper flips.
      Action executed = a;
      if (fumble(expert_rng)) executed[3] = -executed[3];
      s = step(s, executed, spec);
      if (success(s, spec)) {
        done = true;
        break;
      }
    }
    if (!done) {
      ++failures;
      if (failures * 2 > attempts && attempts >= 10) {
        throw std::runtime_error("generate_demonstrations: expert failed " +
                                 std::to_string(failures) + " of " +
                                 std::to_string(attempts) + " episodes on " +
                                 spec.name());
      }
      continue;
    }
    record(s, Action{0.0f, 0.0f, 0.0f, s.closed ? 1.0f : -1.0f});
    const PoseTrace trace = emulate_tracking(gt, data.tracker, tracker_rng);
    for (std::size_t t = 0; t < ep.frames.size(); ++t) {
      for (std::size_t i = 0; i < trace.objects.size(); ++i) {
        ep.frames[t].est_poses.push_back(trace.objects[i][t]);
      }
    }
    data.episodes.push_back(std::move(ep));
  }
  compute_action_stats(data);
  return data;
}

}  // namespace posedp
