#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "posedp/config.hpp"
#include "posedp/denoiser.hpp"
#include "posedp/diffusion.hpp"
#include "posedp/env.hpp"

namespace posedp {

struct TrainingMetrics {
  std::vector<float> epoch_loss;
  std::vector<float> epoch_seconds;

  /// Mean wall-clock seconds per epoch (TE).
  double mean_epoch_seconds() const;
};

struct Checkpoint {
  ExperimentConfig config;
  DenoiserParams params;
  std::optional<DenoiserParams> ema;
  std::vector<float> action_min;
  std::vector<float> action_max;
  std::vector<float> obs_min;  // per encoded-frame dimension
  std::vector<float> obs_max;
  TrainingMetrics metrics;

  /// EMA weights when present and enabled, raw weights otherwise.
  const DenoiserParams& policy_params() const;
};

// Checkpoint file layout (little-endian):
//
//   "PDPCKPT\0"                 8-byte magic
//   u32 version                 kCheckpointVersion
//   u32 len + config text       to_text(config)
//   u32 hidden width            resolved denoiser width
//   u32 tensor count N          then N x (u32 len + name, floats)
//   u32 has_ema                 then N more tensors when 1
//   floats action_min, floats action_max
//   floats obs_min, floats obs_max
//   floats epoch_loss, floats epoch_seconds
//
// Tensors follow parameter_layout() order; each float block is a u32 count
// followed by float32 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// (condition, normalized action chunk) pairs sliced with stride 1.
struct TrainingSet {
  std::size_t cond_width = 0;
  std::size_t chunk_width = 0;
  std::vector<float> obs_min;
  std::vector<float> obs_max;
  std::vector<float> conditions;  // [N, cond_width]
  std::vector<float> chunks;      // [N, chunk_width]

  std::size_t size() const { return chunk_width ? chunks.size() / chunk_width : 0; }
};

/// Encoded observation for one frame under the configured mode.
std::vector<float> encode_observation(ObservationMode mode,
                                      const std::vector<float>& robot_state,
                                      const std::vector<Pose>& poses,
                                      const GridImage* grid);

std::vector<float> normalize_action(const Action& action,
                                    std::span<const float> lo,
                                    std::span<const float> hi);
Action denormalize_action(std::span<const float> normalized,
                          std::span<const float> lo, std::span<const float> hi);

/// Maps each frame dimension to [-1, 1] by its dataset range. Dimensions
/// that are constant in the data are only shifted.
std::vector<float> normalize_observation(std::span<const float> frame,
                                         std::span<const float> lo,
                                         std::span<const float> hi);

/// Conditions are normalized per frame dimension; chunks past the episode
/// end repeat the final action.
TrainingSet build_training_set(const ExperimentConfig& config,
                               const Dataset& dataset);

using EpochCallback = std::function<void(int epoch, float loss, double seconds)>;

/// epochs x ceil(N / batch) Adam steps on the denoising objective.
Checkpoint train(const ExperimentConfig& config, const Dataset& dataset,
                 const EpochCallback& on_epoch = {});

struct EpisodeReport {
  std::uint64_t seed = 0;
  bool success = false;
  int steps = 0;
  int sampler_calls = 0;
  /// Environment steps executed after each sampler call.
  std::vector<int> steps_per_plan;
  std::vector<double> position_errors;
  std::vector<double> orientation_errors;
  std::string diagnostic;
};

/// Closed-loop receding-horizon episode: every H_a steps the policy samples
/// a fresh H_p chunk from the last H_o observations.
EpisodeReport rollout(const Checkpoint& checkpoint, const TaskSpec& spec,
                      const TrackerConfig& tracker, std::uint64_t seed);

using EpisodeRunner = std::function<EpisodeReport(std::uint64_t seed)>;

struct EvaluationResult {
  double success_rate = 0.0;
  std::vector<EpisodeReport> episodes;

  double mean_position_error() const;
  double mean_orientation_error() const;
};

/// Runs seeds seed .. seed + n - 1; SR = successes / n.
EvaluationResult evaluate(const EpisodeRunner& runner, int n, std::uint64_t seed);
EvaluationResult evaluate(const Checkpoint& checkpoint, const TaskSpec& spec,
                          const TrackerConfig& tracker, int n,
                          std::uint64_t seed);

}  // namespace posedp
