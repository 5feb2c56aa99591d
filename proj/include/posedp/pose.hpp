#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

namespace posedp {

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quaternion identity() { return {}; }
  static Quaternion from_axis_angle(std::array<double, 3> axis, double angle);
  static Quaternion from_yaw(double yaw);

  double norm() const;
  double dot(const Quaternion& other) const;
  Quaternion operator*(const Quaternion& rhs) const;
  Quaternion operator-() const { return {-w, -x, -y, -z}; }
  bool operator==(const Quaternion&) const = default;
};

/// Unit quaternion with w >= 0. Throws when ||q|| <= 1e-9.
Quaternion quat_normalize(const Quaternion& q);

/// Rotation angle between two unit quaternions in [0, pi]; q and -q are
/// the same rotation. Throws on non-unit input.
double quat_angular_distance(const Quaternion& a, const Quaternion& b);

/// Yaw angle of a rotation about +z.
double quat_yaw(const Quaternion& q);

/// Translation plus orientation. An invalid pose is all zeros, including
/// the quaternion, and stands for "object not seen yet".
struct Pose {
  std::array<double, 3> translation{0.0, 0.0, 0.0};
  Quaternion rotation{0.0, 0.0, 0.0, 0.0};
  bool valid = false;

  static Pose null() { return {}; }
  static Pose make(std::array<double, 3> translation, const Quaternion& rotation);
  static Pose planar(double x, double y, double yaw);

  bool operator==(const Pose&) const = default;
};

inline constexpr std::size_t kPoseEncodingWidth = 8;

/// [tx, ty, tz, qw, qx, qy, qz, valid]; the null pose encodes as zeros.
std::array<float, kPoseEncodingWidth> encode_pose(const Pose& pose);
Pose decode_pose(std::span<const float> encoded);

/// Number of encode_pose calls so far in this process.
std::uint64_t pose_encode_count();

/// o_t = [s_t, T_1 .. T_J].
struct ObservationFrame {
  std::vector<float> robot_state;
  std::vector<Pose> poses;

  std::size_t encoded_width() const {
    return robot_state.size() + kPoseEncodingWidth * poses.size();
  }
  std::vector<float> encode() const;
};

/// Concatenates the last `obs_horizon` encoded frames oldest-first, front
/// padding with the earliest available frame. All frames must share a width.
std::vector<float> assemble_window(std::span<const std::vector<float>> encoded,
                                   int obs_horizon);

std::vector<float> assemble_condition(std::span<const ObservationFrame> frames,
                                      int obs_horizon);

}  // namespace posedp
