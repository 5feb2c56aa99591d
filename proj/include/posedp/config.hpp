#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "posedp/denoiser.hpp"
#include "posedp/diffusion.hpp"
#include "posedp/env.hpp"
#include "posedp/perception.hpp"

namespace posedp {

enum class ObservationMode { gt_pose, est_pose, grid_image };

std::string to_string(ObservationMode mode);
ObservationMode mode_from_string(const std::string& name);

/// Everything needed to reproduce one train + evaluate run.
struct ExperimentConfig {
  TaskSpec task = TaskSpec::reach();
  ObservationMode mode = ObservationMode::gt_pose;
  int grid_resolution = kDefaultGridResolution;

  int obs_horizon = 2;         // H_o
  int prediction_horizon = 8;  // H_p
  int action_horizon = 4;      // H_a

  int hidden_width = 96;
  int depth = 2;
  int embed_dim = 32;
  /// When > 0, hidden_width is replaced by the widest network that fits.
  std::size_t param_budget = 0;

  int diffusion_steps = kDefaultDiffusionSteps;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;

  int epochs = 60;
  int batch_size = 64;
  float learning_rate = 1e-3f;
  float ema_decay = 0.995f;
  bool use_ema = true;

  int demo_episodes = 200;
  std::uint64_t data_seed = 1;
  std::uint64_t train_seed = 7;
  std::uint64_t eval_seed = 100000;
  int eval_rollouts = 100;

  TrackerConfig tracker = TrackerConfig::calibrated(1);

  /// Width of one encoded observation frame for this mode.
  int frame_width() const;
  DenoiserConfig denoiser() const;
  NoiseSchedule schedule() const;
  /// Tracker with first-visible frames filled in from the task when unset
  /// and one canonical offset per object (the last one repeats).
  TrackerConfig effective_tracker() const;
  void validate() const;
};

/// Flat "section.key = value" text, one entry per line, '#' comments.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Applies recognized keys over `base`; unknown keys are an error.
ExperimentConfig parse_config(const std::string& text,
                              ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_text(const ExperimentConfig& config);

}  // namespace posedp
