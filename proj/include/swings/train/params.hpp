#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "swings/core/gaussian.hpp"
#include "swings/raster/rasterizer.hpp"

namespace swings {

// Optimization-space layout of one Gaussian:
// [0,3) mean | [3,6) log-scale | [6,10) raw quaternion | 10 opacity logit | [11,14) color
inline constexpr std::size_t kParamCount = 14;
using ParamVec = std::array<double, kParamCount>;

enum class ParamGroup { kMean, kLogScale, kRotation, kOpacity, kColor };

constexpr ParamGroup param_group(std::size_t i) {
  if (i < 3) return ParamGroup::kMean;
  if (i < 6) return ParamGroup::kLogScale;
  if (i < 10) return ParamGroup::kRotation;
  if (i == 10) return ParamGroup::kOpacity;
  return ParamGroup::kColor;
}

inline ParamVec to_params(const Gaussian<double>& g) {
  const double o = std::clamp(g.opacity, 1e-12, 1.0 - 1e-12);
  return {g.mean.x,          g.mean.y,          g.mean.z,
          std::log(g.scale.x), std::log(g.scale.y), std::log(g.scale.z),
          g.rotation.w,      g.rotation.x,      g.rotation.y,
          g.rotation.z,      logit(o),          g.color.x,
          g.color.y,         g.color.z};
}

// The quaternion is passed through as stored; the rasterizer normalizes.
inline Gaussian<double> from_params(const ParamVec& p) {
  Gaussian<double> g;
  g.mean = {p[0], p[1], p[2]};
  g.scale = {std::exp(p[3]), std::exp(p[4]), std::exp(p[5])};
  g.rotation = {p[6], p[7], p[8], p[9]};
  g.opacity = sigmoid(p[10]);
  g.color = {p[11], p[12], p[13]};
  return g;
}

inline ParamVec flatten(const GaussianGrad<double>& g) {
  return {g.mean.x,       g.mean.y,       g.mean.z,       g.log_scale.x, g.log_scale.y,
          g.log_scale.z,  g.rotation.w,   g.rotation.x,   g.rotation.y,  g.rotation.z,
          g.opacity_logit, g.color.x,     g.color.y,      g.color.z};
}

}  // namespace swings
