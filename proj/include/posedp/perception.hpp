#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "posedp/pose.hpp"

namespace posedp {

/// Noise model standing in for segmentation, mesh generation, one-shot pose
/// estimation and frame-to-frame tracking of each object.
struct TrackerConfig {
  double sigma_pos = 0.0006;  // meters, per axis
  double sigma_rot = 0.01;    // radians, std of the perturbation angle
  /// Frame F_i at which the one-shot estimate uses inflated noise.
  double estimation_extra_noise = 3.0;
  /// Fixed rotation between each generated mesh frame and the true model
  /// frame. Missing entries default to identity.
  std::vector<Quaternion> canonical_offsets;
  /// First-visibility frame F_i per object (1-based). Missing entries are 1.
  std::vector<int> first_visible_frames;

  Quaternion offset_for(std::size_t object) const;
  int first_visible(std::size_t object) const;
  void validate() const;

  /// Zero noise, identity offsets, every object visible from frame 1.
  static TrackerConfig noiseless();
  /// Default calibration: 0.0006 m translation noise and a z-axis
  /// canonical offset of 0.7858 rad on every object.
  static TrackerConfig calibrated(std::size_t objects);
};

inline constexpr double kCalibratedOffsetAngle = 0.7858;

/// Online tracker for one object. Frames are fed in order starting at 1.
class PoseTracker {
 public:
  PoseTracker(const TrackerConfig& config, std::size_t object);

  /// Estimated pose at `frame` given the ground truth at that frame.
  Pose observe(int frame, const Pose& ground_truth, std::mt19937_64& rng);

 private:
  double sigma_pos_;
  double sigma_rot_;
  double extra_;
  Quaternion offset_;
  int first_visible_;
};

/// Estimated poses, indexed [object][frame - 1].
struct PoseTrace {
  std::vector<std::vector<Pose>> objects;
};

/// Runs the tracker over per-object ground-truth sequences (all the same
/// length T). Throws when some F_i > T.
PoseTrace emulate_tracking(const std::vector<std::vector<Pose>>& ground_truth,
                           const TrackerConfig& config, std::mt19937_64& rng);

struct PoseErrors {
  double position = 0.0;     // mean Euclidean distance, meters
  double orientation = 0.0;  // mean angular distance, radians
  std::size_t frames = 0;    // number of valid estimates counted
};

/// Means over frames whose estimate is valid. Throws if there are none.
PoseErrors pose_errors(const PoseTrace& estimate,
                       const std::vector<std::vector<Pose>>& ground_truth);

struct GridImage {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // row-major, values in [0, 1]

  static GridImage filled(int height, int width, float value);
  float at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row * width + col)];
  }
};

inline constexpr double kPsnrCapDb = 100.0;

/// 10 log10(1 / MSE) for images in [0, 1]; identical images give kPsnrCapDb.
double psnr(const GridImage& a, const GridImage& b);

}  // namespace posedp
