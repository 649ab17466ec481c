#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swings/codec/bytes.hpp"
#include "swings/codec/half.hpp"
#include "swings/core/error.hpp"
#include "swings/core/gaussian.hpp"

namespace swings {

enum class Profile : std::uint8_t { kFull = 0, kQuantized = 1 };

inline constexpr std::size_t kFullRecordBytes = 56;
inline constexpr std::size_t kQuantizedRecordBytes = 30;

constexpr std::size_t record_size(Profile p) {
  return p == Profile::kFull ? kFullRecordBytes : kQuantizedRecordBytes;
}

inline Profile profile_from_id(std::uint32_t id) {
  if (id > 1) throw FormatError("unknown quantization profile " + std::to_string(id));
  return static_cast<Profile>(id);
}

namespace detail {

inline std::uint8_t quantize_unit(double v, double lo) {
  // [lo, 1] -> [0, 255]; rotation uses lo = -1, opacity lo = 0.
  const double scaled = lo < 0 ? (v + 1.0) * 127.5 : v * 255.0;
  return static_cast<std::uint8_t>(std::clamp(std::round(scaled), 0.0, 255.0));
}

// Decoded rotation: b/127.5 - 1, renormalized. Renormalizing alone can push
// a large component across a rounding boundary, so components that leave
// their byte's quantization cell are pinned to the cell edge and the free
// ones rescaled to keep unit norm. This keeps encode(decode(b)) == b.
inline Quat<float> decode_rotation(const std::array<std::uint8_t, 4>& b) {
  std::array<double, 4> center{}, q{};
  double n = 0;
  for (int i = 0; i < 4; ++i) {
    center[i] = b[i] / 127.5 - 1.0;
    n += center[i] * center[i];
  }
  if (n == 0) return {1, 0, 0, 0};
  n = std::sqrt(n);
  for (int i = 0; i < 4; ++i) q[i] = center[i] / n;

  constexpr double kHalfCell = 0.499 / 127.5;
  std::array<bool, 4> pinned{};
  for (int round = 0; round < 4; ++round) {
    bool moved = false;
    for (int i = 0; i < 4; ++i) {
      if (pinned[i]) continue;
      const double lo = center[i] - kHalfCell, hi = center[i] + kHalfCell;
      if (q[i] < lo || q[i] > hi) {
        q[i] = std::clamp(q[i], lo, hi);
        pinned[i] = moved = true;
      }
    }
    if (!moved) break;
    double fixed = 0, free = 0;
    for (int i = 0; i < 4; ++i) (pinned[i] ? fixed : free) += q[i] * q[i];
    if (free == 0 || fixed >= 1) break;
    const double s = std::sqrt((1 - fixed) / free);
    for (int i = 0; i < 4; ++i)
      if (!pinned[i]) q[i] *= s;
  }
  return {static_cast<float>(q[0]), static_cast<float>(q[1]), static_cast<float>(q[2]),
          static_cast<float>(q[3])};
}

template <typename T>
void require_finite(const Gaussian<T>& g) {
  const T vals[] = {g.mean.x,     g.mean.y,     g.mean.z,     g.rotation.w, g.rotation.x,
                    g.rotation.y, g.rotation.z, g.scale.x,    g.scale.y,    g.scale.z,
                    g.opacity,    g.color.x,    g.color.y,    g.color.z};
  for (T v : vals)
    if (!std::isfinite(static_cast<double>(v))) throw InvalidParameter("encode_record: non-finite attribute");
}

inline std::uint16_t half_checked(float v) {
  const std::uint16_t h = float_to_half(v);
  if ((h & 0x7c00u) == 0x7c00u) throw InvalidParameter("encode_record: value outside fp16 range");
  return h;
}

}  // namespace detail

// Appends one fixed-size little-endian record.
template <typename T>
void encode_record(const Gaussian<T>& src, Profile profile, std::vector<std::uint8_t>& out) {
  detail::require_finite(src);
  const Gaussian<float> g = src.template cast<float>();
  if (profile == Profile::kFull) {
    for (int i = 0; i < 3; ++i) bytes::put_f32(out, g.mean[i]);
    for (int i = 0; i < 4; ++i) bytes::put_f32(out, g.rotation[i]);
    for (int i = 0; i < 3; ++i) bytes::put_f32(out, g.scale[i]);
    bytes::put_f32(out, g.opacity);
    for (int i = 0; i < 3; ++i) bytes::put_f32(out, g.color[i]);
    return;
  }
  for (int i = 0; i < 3; ++i) bytes::put_u16(out, detail::half_checked(g.mean[i]));
  for (int i = 0; i < 4; ++i) bytes::put_u8(out, detail::quantize_unit(g.rotation[i], -1));
  for (int i = 0; i < 3; ++i)
    bytes::put_u16(out, detail::half_checked(std::max(g.scale[i], static_cast<float>(kScaleFloor))));
  bytes::put_u8(out, detail::quantize_unit(g.opacity, 0));
  for (int i = 0; i < 3; ++i) bytes::put_f32(out, g.color[i]);
  bytes::put_u8(out, 0);
}

template <typename T>
std::vector<std::uint8_t> encode_record(const Gaussian<T>& g, Profile profile) {
  std::vector<std::uint8_t> out;
  out.reserve(record_size(profile));
  encode_record(g, profile, out);
  return out;
}

inline Gaussian<float> decode_record(std::span<const std::uint8_t> data, Profile profile) {
  if (data.size() != record_size(profile))
    throw FormatError("decode_record: expected " + std::to_string(record_size(profile)) + " bytes, got " +
                      std::to_string(data.size()));
  bytes::Reader r(data);
  Gaussian<float> g;
  if (profile == Profile::kFull) {
    for (int i = 0; i < 3; ++i) g.mean[i] = r.f32();
    for (int i = 0; i < 4; ++i) g.rotation[i] = r.f32();
    for (int i = 0; i < 3; ++i) g.scale[i] = r.f32();
    g.opacity = r.f32();
    for (int i = 0; i < 3; ++i) g.color[i] = r.f32();
    return g;
  }
  for (int i = 0; i < 3; ++i) g.mean[i] = half_to_float(r.u16());
  std::array<std::uint8_t, 4> rot{};
  for (auto& b : rot) b = r.u8();
  g.rotation = detail::decode_rotation(rot);
  for (int i = 0; i < 3; ++i)
    g.scale[i] = std::max(half_to_float(r.u16()), static_cast<float>(kScaleFloor));
  g.opacity = r.u8() / 255.0f;
  for (int i = 0; i < 3; ++i) g.color[i] = r.f32();
  if (r.u8() != 0) throw FormatError("decode_record: nonzero pad byte");
  return g;
}

}  // namespace swings
