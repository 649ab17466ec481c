#pragma once

// Test-only reference implementations. These intentionally avoid the
// library's projection and blending code paths: matrices come from Eigen,
// 2x2 inverses are formed explicitly, and blending is a plain loop over all
// splats with no tiling or footprint cutoff.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "swings/core/gaussian.hpp"
#include "swings/raster/image.hpp"

namespace swings::oracle {

inline Eigen::Matrix3d eigen_rotation(const Quat<double>& q) {
  Eigen::Quaterniond e(q.w, q.x, q.y, q.z);
  e.normalize();
  return e.toRotationMatrix();
}

inline Eigen::Matrix3d eigen_covariance(const Gaussian<double>& g) {
  const Eigen::Matrix3d r = eigen_rotation(g.rotation);
  const Eigen::Vector3d s(g.scale.x, g.scale.y, g.scale.z);
  return r * s.cwiseAbs2().asDiagonal() * r.transpose();
}

inline Eigen::Matrix3d eigen_camera_rotation(const Camera<double>& cam) {
  Eigen::Matrix3d w;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) w(r, c) = cam.rotation(r, c);
  return w;
}

struct OracleSplat {
  double depth;
  std::size_t index;
  Eigen::Vector2d mean;
  Eigen::Matrix2d inv_cov;
  double opacity;
  Eigen::Vector3d color;
};

// Straight-line evaluation of front-to-back alpha blending for one pixel.
inline Eigen::Vector3d oracle_pixel(const Camera<double>& cam, const std::vector<Gaussian<double>>& gs,
                                    double px, double py) {
  const Eigen::Matrix3d w = eigen_camera_rotation(cam);
  const Eigen::Vector3d t(cam.translation.x, cam.translation.y, cam.translation.z);
  std::vector<OracleSplat> splats;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const auto& g = gs[i];
    const Eigen::Vector3d p = w * Eigen::Vector3d(g.mean.x, g.mean.y, g.mean.z) + t;
    if (p.z() <= 0.01) continue;
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / p.z(), 0, -cam.fx * p.x() / (p.z() * p.z()), 0, cam.fy / p.z(),
        -cam.fy * p.y() / (p.z() * p.z());
    Eigen::Matrix2d cov = j * w * eigen_covariance(g) * w.transpose() * j.transpose();
    cov += 0.3 * Eigen::Matrix2d::Identity();
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    Eigen::Matrix2d inv;
    inv << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;
    splats.push_back({p.z(), i,
                      Eigen::Vector2d(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy),
                      inv, g.opacity, Eigen::Vector3d(g.color.x, g.color.y, g.color.z)});
  }
  std::sort(splats.begin(), splats.end(), [](const auto& a, const auto& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.index < b.index;
  });
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  double trans = 1.0;
  for (const auto& s : splats) {
    const Eigen::Vector2d d = Eigen::Vector2d(px, py) - s.mean;
    const double alpha = std::min(0.999, s.opacity * std::exp(-0.5 * d.dot(s.inv_cov * d)));
    c += s.color * alpha * trans;
    trans *= 1.0 - alpha;
    if (trans < 1e-4) break;
  }
  return c;
}

inline Camera<double> test_camera(int w, int h, double f) {
  return look_at<double>(w, h, f, f, {0.0, 0.0, -4.0}, {0.0, 0.0, 0.0});
}

// Random Gaussians inside [-1,1]^3 with moderate opacities, suitable for
// finite-difference checks (no alpha clamping, no early termination).
inline std::vector<Gaussian<double>> random_scene(std::mt19937_64& rng, int n, double min_scale = 0.08,
                                                  double max_scale = 0.3, double max_opacity = 0.8) {
  std::uniform_real_distribution<double> pos(-0.8, 0.8), sc(min_scale, max_scale),
      op(0.1, max_opacity), col(0.05, 0.95);
  std::normal_distribution<double> nq(0.0, 1.0);
  std::vector<Gaussian<double>> gs;
  for (int i = 0; i < n; ++i) {
    Gaussian<double> g;
    g.mean = {pos(rng), pos(rng), pos(rng)};
    g.rotation = Quat<double>{nq(rng), nq(rng), nq(rng), nq(rng)}.normalized();
    g.scale = {sc(rng), sc(rng), sc(rng)};
    g.opacity = op(rng);
    g.color = {col(rng), col(rng), col(rng)};
    gs.push_back(g);
  }
  return gs;
}

// Toy setting for relocation checks: ground truth is a random opaque scene;
// the model is a partially fitted copy (perturbed means and colors) plus
// `dead` extra Gaussians at near-zero opacity.
struct RelocationToy {
  std::vector<Gaussian<double>> truth;
  std::vector<Gaussian<double>> model;
};

inline RelocationToy relocation_toy(std::mt19937_64& rng, int n = 120, int dead = 20) {
  RelocationToy t;
  t.truth = random_scene(rng, n, 0.05, 0.15, 0.9);
  std::uniform_real_distribution<double> jitter(-0.15, 0.15), shift(-0.02, 0.02), tiny(0.0005, 0.004);
  t.model = t.truth;
  for (auto& g : t.model)
    for (int k = 0; k < 3; ++k) {
      g.color[k] = std::clamp(g.color[k] + jitter(rng), 0.0, 1.0);
      g.mean[k] += shift(rng);
    }
  auto extra = random_scene(rng, dead, 0.05, 0.15, 0.9);
  for (auto& g : extra) {
    g.opacity = tiny(rng);
    t.model.push_back(g);
  }
  return t;
}

// MSE computed in a separate two-pass accumulation (per-channel sums first).
inline double oracle_psnr(const Image<double>& a, const Image<double>& b) {
  double sums[3] = {0, 0, 0};
  for (int c = 0; c < 3; ++c)
    for (int y = a.height - 1; y >= 0; --y)
      for (int x = a.width - 1; x >= 0; --x) {
        const double d = a.at(x, y, c) - b.at(x, y, c);
        sums[c] += d * d;
      }
  const double mse = (sums[0] + sums[1] + sums[2]) / (3.0 * a.width * a.height);
  return -10.0 * std::log10(mse);
}

}  // namespace swings::oracle
