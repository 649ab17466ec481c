#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "swings/codec/slice.hpp"
#include "swings/core/error.hpp"
#include "swings/core/gaussian.hpp"

namespace swings {

inline void check_fraction(double fraction) {
  if (!(fraction > 0 && fraction <= 1))
    throw InvalidParameter("quality fraction must lie in (0,1], got " + std::to_string(fraction));
}

// ceil(fraction * slice_size), computed so that exact products such as
// 0.6 * 5 do not round up through floating-point error.
inline std::uint32_t abr_kept_count(double fraction, std::uint32_t slice_size) {
  check_fraction(fraction);
  const double target = fraction * slice_size;
  const double nearest = std::round(target);
  const double want = std::abs(target - nearest) < 1e-9 * std::max(1.0, target) ? nearest : std::ceil(target);
  return static_cast<std::uint32_t>(std::clamp(want, 1.0, static_cast<double>(slice_size)));
}

struct AbrSelection {
  std::vector<std::size_t> kept;  // ascending record indices
  std::uint32_t kept_count = 0;
};

// Tail drop: keeps the abr_kept_count highest-opacity records. Equal
// opacities keep the lower index. The result preserves wire order.
template <typename T>
AbrSelection abr_subsample(std::span<const Gaussian<T>> records, double fraction, std::uint32_t slice_size) {
  const std::uint32_t want = std::min<std::uint32_t>(abr_kept_count(fraction, slice_size),
                                                     static_cast<std::uint32_t>(records.size()));
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].opacity > records[b].opacity; });
  AbrSelection sel;
  sel.kept.assign(order.begin(), order.begin() + want);
  std::sort(sel.kept.begin(), sel.kept.end());
  sel.kept_count = want;
  return sel;
}

// Re-frames a decoded slice with only the selected records; the header keeps
// its target frame and slot and the remainder is left to padding.
inline std::vector<std::uint8_t> subsample_slice(const DecodedSlice& slice, double fraction, std::uint32_t slice_size,
                                                 Profile profile) {
  const auto real = std::span<const Gaussian<float>>(slice.records).first(slice.kept());
  const auto sel = abr_subsample(real, fraction, slice_size);
  std::vector<Gaussian<float>> kept;
  kept.reserve(sel.kept.size());
  for (std::size_t i : sel.kept) kept.push_back(real[i]);
  SliceHeader h = slice.header;
  h.kept_count = sel.kept_count;
  return pack_slice(h, std::span<const Gaussian<float>>(kept), profile);
}

}  // namespace swings
