#include "posedp/pose.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace posedp {

namespace {

std::atomic<std::uint64_t> g_pose_encodes{0};

constexpr double kUnitTolerance = 1e-5;

void require_unit(const Quaternion& q, const char* what) {
  if (std::abs(q.norm() - 1.0) > kUnitTolerance) {
    throw std::invalid_argument(std::string(what) +
                                ": quaternion is not unit (norm " +
                                std::to_string(q.norm()) + ")");
  }
}

}  // namespace

Quaternion Quaternion::from_axis_angle(std::array<double, 3> axis,
                                       double angle) {
  const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (n < 1e-12) return identity();
  const double s = std::sin(0.5 * angle) / n;
  return {std::cos(0.5 * angle), axis[0] * s, axis[1] * s, axis[2] * s};
}

Quaternion Quaternion::from_yaw(double yaw) {
  return quat_normalize({std::cos(0.5 * yaw), 0.0, 0.0, std::sin(0.5 * yaw)});
}

double Quaternion::norm() const { return std::sqrt(dot(*this)); }

double Quaternion::dot(const Quaternion& o) const {
  return w * o.w + x * o.x + y * o.y + z * o.z;
}

Quaternion Quaternion::operator*(const Quaternion& r) const {
  return {w * r.w - x * r.x - y * r.y - z * r.z,
          w * r.x + x * r.w + y * r.z - z * r.y,
          w * r.y - x * r.z + y * r.w + z * r.x,
          w * r.z + x * r.y - y * r.x + z * r.w};
}

Quaternion quat_normalize(const Quaternion& q) {
  const double n = q.norm();
  if (!(n > 1e-9)) {
    throw std::invalid_argument("quat_normalize: near-zero quaternion norm");
  }
  Quaternion u{q.w / n, q.x / n, q.y / n, q.z / n};
  return u.w < 0.0 ? -u : u;
}

double quat_angular_distance(const Quaternion& a, const Quaternion& b) {
  require_unit(a, "quat_angular_distance");
  require_unit(b, "quat_angular_distance");
  const double c = std::clamp(std::abs(a.dot(b)), 0.0, 1.0);
  return 2.0 * std::acos(c);
}

double quat_yaw(const Quaternion& q) {
  return std::atan2(2.0 * (q.w * q.z + q.x * q.y),
                    1.0 - 2.0 * (q.y * q.y + q.z * q.z));
}

Pose Pose::make(std::array<double, 3> translation, const Quaternion& rotation) {
  return {translation, quat_normalize(rotation), true};
}

Pose Pose::planar(double x, double y, double yaw) {
  return make({x, y, 0.0}, Quaternion::from_yaw(yaw));
}

std::array<float, kPoseEncodingWidth> encode_pose(const Pose& pose) {
  g_pose_encodes.fetch_add(1, std::memory_order_relaxed);
  if (!pose.valid) return {};
  const auto& t = pose.translation;
  const auto& q = pose.rotation;
  return {static_cast<float>(t[0]), static_cast<float>(t[1]),
          static_cast<float>(t[2]), static_cast<float>(q.w),
          static_cast<float>(q.x),  static_cast<float>(q.y),
          static_cast<float>(q.z),  1.0f};
}

Pose decode_pose(std::span<const float> e) {
  if (e.size() != kPoseEncodingWidth) {
    throw std::invalid_argument("decode_pose: expected 8 values");
  }
  if (e[7] < 0.5f) return Pose::null();
  return Pose::make({e[0], e[1], e[2]}, {e[3], e[4], e[5], e[6]});
}

std::uint64_t pose_encode_count() {
  return g_pose_encodes.load(std::memory_order_relaxed);
}

std::vector<float> ObservationFrame::encode() const {
  std::vector<float> out(robot_state);
  out.reserve(encoded_width());
  for (const auto& p : poses) {
    const auto e = encode_pose(p);
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

std::vector<float> assemble_window(std::span<const std::vector<float>> encoded,
                                   int obs_horizon) {
  if (encoded.empty()) throw std::invalid_argument("assemble_condition: no frames");
  if (obs_horizon < 1) throw std::invalid_argument("assemble_condition: H_o must be >= 1");
  const std::size_t width = encoded.front().size();
  const auto h = static_cast<std::size_t>(obs_horizon);
  const std::size_t available = std::min(h, encoded.size());
  const std::size_t first = encoded.size() - available;
  std::vector<float> out;
  out.reserve(h * width);
  for (std::size_t slot = 0; slot < h; ++slot) {
    const std::size_t pad = h - available;
    const std::size_t src = slot < pad ? first : first + (slot - pad);
    const auto& frame = encoded[src];
    if (frame.size() != width) {
      throw std::invalid_argument("assemble_condition: frame widths differ");
    }
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

std::vector<float> assemble_condition(std::span<const ObservationFrame> frames,
                                      int obs_horizon) {
  if (frames.empty()) throw std::invalid_argument("assemble_condition: no frames");
  const std::size_t keep = std::min(frames.size(), static_cast<std::size_t>(std::max(obs_horizon, 1)));
  std::vector<std::vector<float>> encoded;
  for (std::size_t i = frames.size() - keep; i < frames.size(); ++i) {
    encoded.push_back(frames[i].encode());
  }
  return assemble_window(encoded, obs_horizon);
}

}  // namespace posedp
