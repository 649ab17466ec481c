#pragma once

#include <bit>
#include <cstdint>

namespace swings {

// IEEE 754 binary16, round to nearest even. Overflow saturates to infinity.
inline std::uint16_t float_to_half(float value) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
  const std::uint32_t sign = (x >> 16) & 0x8000u;
  const std::uint32_t exp = (x >> 23) & 0xffu;
  const std::uint32_t mant = x & 0x7fffffu;
  if (exp == 0xffu) return static_cast<std::uint16_t>(sign | 0x7c00u | (mant ? 0x200u : 0u));
  const int e = static_cast<int>(exp) - 127 + 15;
  if (e >= 31) return static_cast<std::uint16_t>(sign | 0x7c00u);

  auto round_shift = [](std::uint32_t m, int shift) {
    const std::uint32_t kept = m >> shift;
    const std::uint32_t rem = m & ((1u << shift) - 1u);
    const std::uint32_t halfway = 1u << (shift - 1);
    return kept + ((rem > halfway || (rem == halfway && (kept & 1u))) ? 1u : 0u);
  };

  if (e <= 0) {
    // Subnormal half: value = m * 2^-24.
    if (exp == 0) return static_cast<std::uint16_t>(sign);  // float subnormals are far below half range
    const int shift = 14 - e;
    if (shift > 24) return static_cast<std::uint16_t>(sign);
    return static_cast<std::uint16_t>(sign | round_shift(mant | 0x800000u, shift));
  }
  // A carry out of the mantissa correctly bumps the exponent, up to infinity.
  return static_cast<std::uint16_t>(sign | ((static_cast<std::uint32_t>(e) << 10) + round_shift(mant, 13)));
}

inline float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1fu;
  std::uint32_t mant = h & 0x3ffu;
  if (exp == 0x1fu) return std::bit_cast<float>(sign | 0x7f800000u | (mant << 13));
  if (exp == 0) {
    if (mant == 0) return std::bit_cast<float>(sign);
    // Normalize the subnormal.
    int e = -1;
    do {
      ++e;
      mant <<= 1;
    } while ((mant & 0x400u) == 0);
    return std::bit_cast<float>(sign | static_cast<std::uint32_t>(127 - 15 - e) << 23 | ((mant & 0x3ffu) << 13));
  }
  return std::bit_cast<float>(sign | ((exp + 127 - 15) << 23) | (mant << 13));
}

}  // namespace swings
