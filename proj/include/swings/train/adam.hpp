#pragma once

#include <cmath>
#include <cstdint>

#include "swings/train/params.hpp"

namespace swings {

struct AdamRates {
  double mean = 1.6e-4;  // multiplied by the scene's spatial scale
  double log_scale = 5e-3;
  double rotation = 1e-3;
  double opacity = 5e-2;
  double color = 2.5e-3;

  double of(ParamGroup g) const {
    switch (g) {
      case ParamGroup::kMean: return mean;
      case ParamGroup::kLogScale: return log_scale;
      case ParamGroup::kRotation: return rotation;
      case ParamGroup::kOpacity: return opacity;
      case ParamGroup::kColor: return color;
    }
    return 0;
  }
};

// Per-Gaussian moment estimates with their own step counter, so resetting one
// Gaussian (rebirth, relocation) leaves the others untouched.
struct AdamState {
  ParamVec m{};
  ParamVec v{};
  std::uint32_t step = 0;

  void reset() { *this = AdamState{}; }
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-15;

inline void adam_step(ParamVec& params, AdamState& st, const ParamVec& grad, const ParamVec& lr) {
  ++st.step;
  const double c1 = 1 - std::pow(kAdamBeta1, st.step);
  const double c2 = 1 - std::pow(kAdamBeta2, st.step);
  for (std::size_t k = 0; k < kParamCount; ++k) {
    st.m[k] = kAdamBeta1 * st.m[k] + (1 - kAdamBeta1) * grad[k];
    st.v[k] = kAdamBeta2 * st.v[k] + (1 - kAdamBeta2) * grad[k] * grad[k];
    params[k] -= lr[k] * (st.m[k] / c1) / (std::sqrt(st.v[k] / c2) + kAdamEps);
  }
}

}  // namespace swings
