#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "posedp/pose.hpp"

using namespace posedp;

TEST(Quaternion, NormalizeGivesUnitNormAndCanonicalSign) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const Quaternion q = quat_normalize({n(rng), n(rng), n(rng), n(rng)});
    EXPECT_NEAR(q.norm(), 1.0, 1e-6);
    EXPECT_GE(q.w, 0.0);
  }
  EXPECT_THROW(quat_normalize({0.0, 0.0, 0.0, 1e-12}), std::invalid_argument);
}

TEST(Quaternion, QuarterTurnDistance) {
  const double h = std::numbers::sqrt2 / 2.0;
  EXPECT_NEAR(quat_angular_distance(Quaternion::identity(), {h, 0.0, 0.0, h}),
              2.0 * std::acos(h), 1e-12);
  EXPECT_NEAR(2.0 * std::acos(h), std::numbers::pi / 2.0, 1e-12);
}

TEST(Quaternion, DistanceProperties) {
  const auto c = oracle::quaternion_properties(1000, 7);
  EXPECT_LT(c.max_norm_error, 1e-6);
  EXPECT_LT(c.max_self_distance, 1e-6);
  EXPECT_LT(c.max_double_cover_gap, 1e-9);
  EXPECT_LT(c.max_symmetry_gap, 1e-9);
  EXPECT_LE(c.max_distance, std::numbers::pi);
  EXPECT_LE(c.max_triangle_violation, 1e-9);
}

TEST(Quaternion, DistanceMatchesReferenceAngle) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto a = oracle::random_unit_quaternion(rng);
    const auto b = oracle::random_unit_quaternion(rng);
    EXPECT_NEAR(quat_angular_distance(a, b), oracle::reference_angle(a, b), 1e-9);
  }
  EXPECT_THROW(quat_angular_distance({2.0, 0.0, 0.0, 0.0}, Quaternion::identity()),
               std::invalid_argument);
}

TEST(Quaternion, YawRoundTripAndComposition) {
  for (double yaw : {-3.0, -1.0, 0.0, 0.5, 2.9}) {
    EXPECT_NEAR(quat_yaw(Quaternion::from_yaw(yaw)), yaw, 1e-12);
  }
  const Quaternion q = Quaternion::from_yaw(0.4) * Quaternion::from_yaw(0.3);
  EXPECT_NEAR(quat_yaw(q), 0.7, 1e-12);
}

TEST(Pose, EncodeDecodeRoundTrip) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Pose p = Pose::make({u(rng), u(rng), u(rng)}, oracle::random_unit_quaternion(rng));
    const Pose back = decode_pose(encode_pose(p));
    EXPECT_TRUE(back.valid);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(back.translation[a], p.translation[a], 1e-6);
    EXPECT_LT(oracle::reference_angle(back.rotation, p.rotation), 1e-3);
  }
}

TEST(Pose, NullPoseEncodesAsZeros) {
  for (float v : encode_pose(Pose::null())) EXPECT_EQ(v, 0.0f);
  const Pose back = decode_pose(encode_pose(Pose::null()));
  EXPECT_FALSE(back.valid);
  EXPECT_EQ(back, Pose::null());
}

TEST(Pose, EncodeCounterCountsCalls) {
  const auto before = pose_encode_count();
  encode_pose(Pose::planar(0.1, 0.2, 0.3));
  ObservationFrame{{1.0f}, {Pose::null(), Pose::null()}}.encode();
  EXPECT_EQ(pose_encode_count() - before, 3u);
}

TEST(ObservationWindow, WidthIsConstantAcrossEpisodePositions) {
  const std::size_t J = 2, ds = 6;
  std::vector<ObservationFrame> frames;
  for (int t = 0; t < 5; ++t) {
    frames.push_back({std::vector<float>(ds, static_cast<float>(t)),
                      {Pose::planar(0.1 * t, 0.0, 0.0), Pose::null()}});
    const auto cond = assemble_condition({frames.data(), frames.size()}, 2);
    EXPECT_EQ(cond.size(), 2 * (ds + 8 * J));
  }
}

TEST(ObservationWindow, FrontPadsWithEarliestFrameOldestFirst) {
  const std::vector<std::vector<float>> one{{1.0f, 2.0f}};
  EXPECT_EQ(assemble_window(one, 3), (std::vector<float>{1, 2, 1, 2, 1, 2}));
  const std::vector<std::vector<float>> three{{1.0f}, {2.0f}, {3.0f}};
  EXPECT_EQ(assemble_window(three, 2), (std::vector<float>{2, 3}));
  const std::vector<std::vector<float>> ragged{{1.0f}, {2.0f, 3.0f}};
  EXPECT_THROW(assemble_window(ragged, 2), std::invalid_argument);
}
