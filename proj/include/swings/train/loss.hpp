#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "swings/core/error.hpp"
#include "swings/core/gaussian.hpp"
#include "swings/raster/image.hpp"
#include "swings/train/params.hpp"

namespace swings {

struct LossWeights {
  double ssim_weight = 0.2;
  double opacity_reg = 2e-2;
  double scale_reg = 1e-2;
};

struct LossResult {
  double value{};
  double l1{};
  double ssim{};
  double regularizer{};
  Image<double> grad_image;           // dL/dpred
  std::vector<ParamVec> reg_grads;    // per optimizable Gaussian, optimization space
};

namespace detail {

inline constexpr int kSsimRadius = 5;  // 11-tap window
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

inline const std::array<double, 2 * kSsimRadius + 1>& ssim_kernel() {
  static const auto kernel = [] {
    std::array<double, 2 * kSsimRadius + 1> k{};
    double sum = 0;
    for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
      k[i + kSsimRadius] = std::exp(-(i * i) / (2 * kSsimSigma * kSsimSigma));
      sum += k[i + kSsimRadius];
    }
    for (double& v : k) v /= sum;
    return k;
  }();
  return kernel;
}

// Separable Gaussian blur with zero padding. The kernel is symmetric, so the
// operator is self-adjoint and doubles as its own transpose in the backward pass.
inline std::vector<double> blur(const std::vector<double>& src, int w, int h) {
  const auto& k = ssim_kernel();
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) acc += k[i + kSsimRadius] * src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) acc += k[i + kSsimRadius] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

}  // namespace detail

// Mean SSIM over all pixels and channels. When `grad` is non-null it
// receives dSSIM/dpred.
inline double ssim(const Image<double>& pred, const Image<double>& gt, Image<double>* grad = nullptr) {
  if (!pred.same_shape(gt)) throw InvalidParameter("ssim: image dimensions differ");
  const int w = pred.width, h = pred.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  const double total = static_cast<double>(n) * 3;
  if (grad) *grad = Image<double>(w, h);
  double sum = 0;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = pred.pixels[i * 3 + c];
      y[i] = gt.pixels[i * 3 + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::blur(x, w, h), my = detail::blur(y, w, h);
    const auto ex = detail::blur(xx, w, h), ey = detail::blur(yy, w, h), exy = detail::blur(xy, w, h);
    std::vector<double> gm(n), ge(n), gc(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double vx = ex[i] - mx[i] * mx[i];
      const double vy = ey[i] - my[i] * my[i];
      const double cxy = exy[i] - mx[i] * my[i];
      const double a1 = 2 * mx[i] * my[i] + detail::kSsimC1;
      const double a2 = 2 * cxy + detail::kSsimC2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + detail::kSsimC1;
      const double b2 = vx + vy + detail::kSsimC2;
      const double s = a1 * a2 / (b1 * b2);
      sum += s;
      if (grad) {
        const double inv = 1.0 / (b1 * b2);
        gm[i] = 2 * my[i] * a2 * inv - 2 * my[i] * a1 * inv - s * 2 * mx[i] / b1 + s * 2 * mx[i] / b2;
        ge[i] = -s / b2;
        gc[i] = 2 * a1 * inv;
      }
    }
    if (grad) {
      const auto bm = detail::blur(gm, w, h), be = detail::blur(ge, w, h), bc = detail::blur(gc, w, h);
      for (std::size_t i = 0; i < n; ++i)
        grad->pixels[i * 3 + c] = (bm[i] + 2 * x[i] * be[i] + y[i] * bc[i]) / total;
    }
  }
  return sum / total;
}

// (1 - w) L1 + w (1 - SSIM) + opacity_reg mean(alpha) + scale_reg mean(|s|_1)
// with the regularizers taken over the optimizable active Gaussians.
inline LossResult loss(const Image<double>& pred, const Image<double>& gt,
                       std::span<const Gaussian<double>> optimizable, const LossWeights& weights) {
  if (!pred.same_shape(gt)) throw InvalidParameter("loss: image dimensions differ");
  LossResult r;
  const double n = static_cast<double>(pred.pixels.size());
  Image<double> ssim_grad;
  r.ssim = ssim(pred, gt, weights.ssim_weight != 0 ? &ssim_grad : nullptr);
  r.grad_image = Image<double>(pred.width, pred.height);
  double l1 = 0;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const double d = pred.pixels[i] - gt.pixels[i];
    l1 += std::abs(d);
    const double sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    r.grad_image.pixels[i] = (1 - weights.ssim_weight) * sign / n;
    if (weights.ssim_weight != 0) r.grad_image.pixels[i] -= weights.ssim_weight * ssim_grad.pixels[i];
  }
  r.l1 = l1 / n;

  r.reg_grads.assign(optimizable.size(), ParamVec{});
  double opacity_sum = 0, scale_sum = 0;
  if (!optimizable.empty()) {
    const double inv = 1.0 / static_cast<double>(optimizable.size());
    for (std::size_t i = 0; i < optimizable.size(); ++i) {
      const auto& g = optimizable[i];
      opacity_sum += g.opacity;
      scale_sum += std::abs(g.scale.x) + std::abs(g.scale.y) + std::abs(g.scale.z);
      ParamVec& pg = r.reg_grads[i];
      pg[10] = weights.opacity_reg * inv * g.opacity * (1 - g.opacity);
      pg[3] = weights.scale_reg * inv * g.scale.x;
      pg[4] = weights.scale_reg * inv * g.scale.y;
      pg[5] = weights.scale_reg * inv * g.scale.z;
    }
    r.regularizer = (weights.opacity_reg * opacity_sum + weights.scale_reg * scale_sum) * inv;
  }
  r.value = (1 - weights.ssim_weight) * r.l1 + weights.ssim_weight * (1 - r.ssim) + r.regularizer;
  return r;
}

}  // namespace swings
