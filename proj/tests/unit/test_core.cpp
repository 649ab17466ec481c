#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "support/oracles.hpp"
#include "swings/core/gaussian.hpp"

using namespace swings;

namespace {

Quat<double> random_unit_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quat<double>{n(rng), n(rng), n(rng), n(rng)}.normalized();
}

void expect_mat_near(const Mat3<double>& m, const Mat3<double>& expected, double tol) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(m(r, c), expected(r, c), tol) << r << "," << c;
}

}  // namespace

TEST(Covariance, IdentityRotation) {
  expect_mat_near(covariance<double>({1, 0, 0, 0}, {2, 1, 1}),
                  Mat3<double>::diagonal({4, 1, 1}), 1e-15);
}

TEST(Covariance, QuarterTurnAboutZSwapsAxes) {
  const auto q = Quat<double>::from_axis_angle({0, 0, 1}, std::numbers::pi / 2);
  expect_mat_near(covariance(q, Vec3<double>{2, 1, 1}), Mat3<double>::diagonal({1, 4, 1}), 1e-12);
}

TEST(Covariance, EigenvaluesAreSquaredScales) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> sc(0.01, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto q = random_unit_quat(rng);
    const Vec3<double> s{sc(rng), sc(rng), sc(rng)};
    const Mat3<double> m = covariance(q, s);
    Eigen::Matrix3d e;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) e(r, c) = m(r, c);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(e);
    std::array<double, 3> got{solver.eigenvalues()[0], solver.eigenvalues()[1],
                              solver.eigenvalues()[2]};
    std::array<double, 3> want{s.x * s.x, s.y * s.y, s.z * s.z};
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(got[i], want[i], 1e-10 * (1 + want[i]));
    // PSD and symmetric.
    EXPECT_GE(got[0], -1e-12);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(m(r, c), m(c, r));
  }
}

TEST(Covariance, RejectsNonPositiveScale) {
  EXPECT_THROW(covariance<double>({1, 0, 0, 0}, {1, 0, 1}), InvalidParameter);
  EXPECT_THROW(covariance<double>({1, 0, 0, 0}, {1, -2, 1}), InvalidParameter);
}

TEST(Intensity, OneAtMean) {
  Gaussian<double> g;
  g.mean = {0.3, -1, 2};
  g.scale = {0.5, 2, 1};
  EXPECT_DOUBLE_EQ(intensity(g, g.mean), 1.0);
}

TEST(Intensity, UnitMahalanobisDistance) {
  Gaussian<double> g;
  g.scale = {1, 1, 1};
  EXPECT_NEAR(intensity(g, {0, 1, 0}), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(intensity(g, {0, 1, 0}), 0.6065306597, 1e-9);
}

TEST(Intensity, MatchesExplicitInverse) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1), sc(0.05, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    Gaussian<double> g;
    g.mean = {u(rng), u(rng), u(rng)};
    g.rotation = random_unit_quat(rng);
    g.scale = {sc(rng), sc(rng), sc(rng)};
    const Vec3<double> x{u(rng), u(rng), u(rng)};
    const Eigen::Matrix3d sigma = oracle::eigen_covariance(g);
    const Eigen::Vector3d d(x.x - g.mean.x, x.y - g.mean.y, x.z - g.mean.z);
    const double expected = std::exp(-0.5 * d.dot(sigma.inverse() * d));
    EXPECT_NEAR(intensity(g, x), expected, 1e-10 * std::max(1.0, expected));
    EXPECT_GT(intensity(g, x), 0.0);
    EXPECT_LE(intensity(g, x), 1.0);
  }
}

TEST(Intensity, InvariantUnderRigidRotation) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1), sc(0.1, 1.5);
  for (int trial = 0; trial < 200; ++trial) {
    Gaussian<double> g;
    g.mean = {u(rng), u(rng), u(rng)};
    g.rotation = random_unit_quat(rng);
    g.scale = {sc(rng), sc(rng), sc(rng)};
    const Vec3<double> x{u(rng), u(rng), u(rng)};
    const Quat<double> extra = random_unit_quat(rng);
    Gaussian<double> rotated = g;
    rotated.rotation = extra * g.rotation;
    const Vec3<double> moved = g.mean + rotation_matrix(extra) * (x - g.mean);
    EXPECT_NEAR(intensity(rotated, moved), intensity(g, x), 1e-9);
  }
}

TEST(Intensity, RejectsScaleBelowFloor) {
  Gaussian<double> g;
  g.scale = {1, 1e-7, 1};
  EXPECT_THROW(intensity(g, {0, 0, 0}), InvalidParameter);
}

TEST(Lifespan, ActiveWindowIsHalfOpen) {
  const Lifespan life{0, 3, 8};
  EXPECT_TRUE(is_active(life, 3));
  EXPECT_FALSE(is_active(life, 8));
  EXPECT_TRUE(is_active(life, 5));
  EXPECT_FALSE(is_active(life, 2));
}

TEST(Lifespan, Validity) {
  EXPECT_TRUE((Lifespan{6, 6, 11}.valid(5)));
  EXPECT_FALSE((Lifespan{6, 6, 12}.valid(5)));
  EXPECT_FALSE((Lifespan{7, 6, 11}.valid(5)));
}

TEST(SliceSlot, ModuloWindow) {
  EXPECT_EQ(slice_slot(7, 5), 2u);
  EXPECT_EQ(slice_slot(0, 5), 0u);
  EXPECT_EQ(slice_slot(5, 5), 0u);
}

TEST(StreamParams, SliceSizeAndValidation) {
  StreamParams p{5, 200000, 30.0, 30, 300};
  EXPECT_EQ(p.slice_size(), 40000u);
  EXPECT_NO_THROW(p.validate());
  p.num_gs = 200001;
  EXPECT_THROW(p.validate(), InvalidParameter);
}

TEST(Camera, LookAtProjectsTargetToPrincipalPoint) {
  const auto cam = look_at<double>(64, 64, 100, 100, {1, 2, -3}, {0.5, 0.1, 0.2});
  const auto p = cam.to_camera({0.5, 0.1, 0.2});
  EXPECT_NEAR(p.x, 0.0, 1e-12);
  EXPECT_NEAR(p.y, 0.0, 1e-12);
  EXPECT_GT(p.z, 0.0);
  EXPECT_NO_THROW(cam.validate());
}
