#include "posedp/perception.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace posedp {

Quaternion TrackerConfig::offset_for(std::size_t object) const {
  return object < canonical_offsets.size() ? canonical_offsets[object]
                                           : Quaternion::identity();
}

int TrackerConfig::first_visible(std::size_t object) const {
  return object < first_visible_frames.size() ? first_visible_frames[object] : 1;
}

void TrackerConfig::validate() const {
  if (sigma_pos < 0.0 || sigma_rot < 0.0) {
    throw std::invalid_argument("tracker sigmas must be >= 0");
  }
  if (estimation_extra_noise < 1.0) {
    throw std::invalid_argument("tracker estimation_extra_noise must be >= 1");
  }
  for (int f : first_visible_frames) {
    if (f < 1) throw std::invalid_argument("first-visible frame must be >= 1");
  }
  for (const auto& q : canonical_offsets) {
    if (std::abs(q.norm() - 1.0) > 1e-6) {
      throw std::invalid_argument("canonical offset must be a unit quaternion");
    }
  }
}

TrackerConfig TrackerConfig::noiseless() {
  TrackerConfig cfg;
  cfg.sigma_pos = 0.0;
  cfg.sigma_rot = 0.0;
  cfg.estimation_extra_noise = 1.0;
  return cfg;
}

TrackerConfig TrackerConfig::calibrated(std::size_t objects) {
  TrackerConfig cfg;
  cfg.canonical_offsets.assign(
      objects, Quaternion::from_axis_angle({0.0, 0.0, 1.0}, kCalibratedOffsetAngle));
  return cfg;
}

PoseTracker::PoseTracker(const TrackerConfig& config, std::size_t object)
    : sigma_pos_(config.sigma_pos),
      sigma_rot_(config.sigma_rot),
      extra_(config.estimation_extra_noise),
      offset_(config.offset_for(object)),
      first_visible_(config.first_visible(object)) {
  config.validate();
}

Pose PoseTracker::observe(int frame, const Pose& gt, std::mt19937_64& rng) {
  if (frame < first_visible_) return Pose::null();
  const double gain = frame == first_visible_ ? extra_ : 1.0;
  Pose est = gt;
  Quaternion rotation = gt.rotation * offset_;
  if (sigma_pos_ > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma_pos_ * gain);
    for (auto& v : est.translation) v += noise(rng);
  }
  if (sigma_rot_ > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<double, 3> axis{normal(rng), normal(rng), normal(rng)};
    const double angle = normal(rng) * sigma_rot_ * gain;
    rotation = rotation * Quaternion::from_axis_angle(axis, angle);
  }
  est.rotation = quat_normalize(rotation);
  est.valid = true;
  return est;
}

PoseTrace emulate_tracking(const std::vector<std::vector<Pose>>& ground_truth,
                           const TrackerConfig& config, std::mt19937_64& rng) {
  if (ground_truth.empty() || ground_truth.front().empty()) {
    throw std::invalid_argument("emulate_tracking: empty ground truth");
  }
  const auto frames = static_cast<int>(ground_truth.front().size());
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    if (static_cast<int>(ground_truth[i].size()) != frames) {
      throw std::invalid_argument("emulate_tracking: ragged ground truth");
    }
    if (config.first_visible(i) > frames) {
      throw std::invalid_argument(
          "emulate_tracking: first-visible frame " +
          std::to_string(config.first_visible(i)) + " of object " +
          std::to_string(i) + " exceeds trace length " + std::to_string(frames));
    }
  }
  std::vector<PoseTracker> trackers;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) trackers.emplace_back(config, i);
  PoseTrace trace;
  trace.objects.assign(ground_truth.size(), {});
  for (int t = 1; t <= frames; ++t) {
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
      trace.objects[i].push_back(
          trackers[i].observe(t, ground_truth[i][static_cast<std::size_t>(t - 1)], rng));
    }
  }
  return trace;
}

PoseErrors pose_errors(const PoseTrace& estimate,
                       const std::vector<std::vector<Pose>>& ground_truth) {
  if (estimate.objects.size() != ground_truth.size()) {
    throw std::invalid_argument("pose_errors: object counts differ");
  }
  PoseErrors out;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    const auto& est = estimate.objects[i];
    const auto& gt = ground_truth[i];
    if (est.size() != gt.size()) {
      throw std::invalid_argument("pose_errors: traces are not aligned");
    }
    for (std::size_t t = 0; t < gt.size(); ++t) {
      if (!est[t].valid) continue;
      double sq = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double d = est[t].translation[a] - gt[t].translation[a];
        sq += d * d;
      }
      out.position += std::sqrt(sq);
      out.orientation += quat_angular_distance(est[t].rotation, gt[t].rotation);
      ++out.frames;
    }
  }
  if (out.frames == 0) throw std::invalid_argument("pose_errors: no valid estimates");
  out.position /= static_cast<double>(out.frames);
  out.orientation /= static_cast<double>(out.frames);
  return out;
}

GridImage GridImage::filled(int height, int width, float value) {
  return {height, width,
          std::vector<float>(static_cast<std::size_t>(height * width), value)};
}

double psnr(const GridImage& a, const GridImage& b) {
  if (a.height != b.height || a.width != b.width ||
      a.pixels.size() != b.pixels.size()) {
    throw std::invalid_argument("psnr: image shapes differ");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(a.pixels.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

}  // namespace posedp
