#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "posedp/perception.hpp"
#include "posedp/pose.hpp"

namespace posedp {

enum class TaskId { reach, push_to_goal, stack };

std::string to_string(TaskId id);
TaskId task_from_string(const std::string& name);

// World geometry. Positions live in [-1, 1]^2; z stays 0.
inline constexpr double kWorkspaceBound = 1.0;
inline constexpr double kSpawnBound = 0.75;
inline constexpr double kMinSeparation = 0.2;
inline constexpr double kGripperRadius = 0.05;
inline constexpr double kObjectRadius = 0.05;
inline constexpr double kGraspRadius = 0.05;
inline constexpr double kRenderHalo = 0.6;
inline constexpr double kMoveStep = 0.02;  // per unit action
inline constexpr double kYawStep = 0.2;    // radians per unit action
inline constexpr float kGripDeadband = 0.25f;
inline constexpr double kExpertNoise = 0.02;
// Chance per demonstration step that the executed gripper command is
// inverted, so recordings include recoveries from missed grasps.
inline constexpr double kGripFumbleProbability = 0.05;

inline constexpr int kActionDim = 4;
inline constexpr int kRobotStateDim = 6;
inline constexpr int kDefaultGridResolution = 32;

using Action = std::array<float, kActionDim>;

struct TaskSpec {
  TaskId id = TaskId::reach;
  int objects = 1;
  int max_steps = 50;
  /// Frame at which objects first become visible to the tracker; > 1 for
  /// the late-reveal variant.
  int reveal_frame = 1;
  std::array<double, 2> goal{0.45, 0.45};
  double success_radius = 0.05;

  static TaskSpec reach();
  static TaskSpec push_to_goal();
  static TaskSpec stack();
  static TaskSpec late_reveal_push(int reveal_frame = 6);
  static TaskSpec named(const std::string& id, int reveal_frame = 1);

  std::string name() const;
  void validate() const;
};

struct WorldState {
  Pose gripper = Pose::planar(0.0, 0.0, 0.0);
  bool closed = false;
  std::vector<Pose> objects;
  int held = -1;
  bool lifted = false;
  bool on_top = false;
  int step = 0;

  /// Frame index of the current observation (1-based).
  int frame() const { return step + 1; }
  bool operator==(const WorldState&) const = default;
};

/// [x, y, qw, qz, closed, holding].
std::vector<float> robot_state(const WorldState& state);

WorldState reset(const TaskSpec& spec, std::uint64_t seed);
WorldState step(const WorldState& state, const Action& action,
                const TaskSpec& spec);
bool success(const WorldState& state, const TaskSpec& spec);

/// Scripted proportional controller with small Gaussian action noise.
Action scripted_expert(const WorldState& state, const TaskSpec& spec,
                       std::mt19937_64& rng);

/// Anti-aliased discs: object 0 at 1.0, object 1 at 0.75, gripper at 0.45
/// (open) or 0.3 (closed); overlapping shapes take the max.
GridImage render_grid(const WorldState& state, int resolution);

/// Number of render_grid calls so far in this process.
std::uint64_t render_count();

struct FrameRecord {
  std::vector<float> robot_state;
  std::vector<Pose> gt_poses;
  std::vector<Pose> est_poses;
  GridImage grid;
  Action action{};
};

struct Episode {
  std::uint64_t seed = 0;
  std::vector<FrameRecord> frames;
};

struct Dataset {
  TaskSpec task;
  TrackerConfig tracker;
  int grid_resolution = kDefaultGridResolution;
  std::vector<float> action_min;
  std::vector<float> action_max;
  std::vector<Episode> episodes;

  std::size_t frame_count() const;
};

/// Runs the expert until `episodes` successes, recording ground-truth poses,
/// emulated pose estimates, grid renders and actions per frame. The final
/// frame is the successful state with a hold action. Throws once more than
/// half of the attempted episodes have failed.
Dataset generate_demonstrations(const TaskSpec& spec, int episodes,
                                const TrackerConfig& tracker,
                                std::uint64_t seed,
                                int grid_resolution = kDefaultGridResolution);

/// Per-dimension [min, max] of all actions in the dataset.
void compute_action_stats(Dataset& dataset);

}  // namespace posedp
