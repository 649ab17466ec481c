#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swings/codec/bytes.hpp"
#include "swings/codec/record.hpp"
#include "swings/core/error.hpp"
#include "swings/core/gaussian.hpp"

namespace swings {

inline constexpr std::size_t kSliceHeaderBytes = 16;

struct SliceHeader {
  FrameIndex target_frame{};
  std::uint8_t slice_index{};
  std::uint32_t kept_count{};

  constexpr bool operator==(const SliceHeader&) const = default;
};

// A slice as held by a player slot: always slice_size records, of which the
// first kept_count are real and the rest inert padding.
struct DecodedSlice {
  SliceHeader header;
  Lifespan lifespan;
  std::vector<Gaussian<float>> records;

  std::size_t kept() const { return header.kept_count; }
};

inline Gaussian<float> padding_record() {
  Gaussian<float> g;
  g.scale = {static_cast<float>(kScaleFloor), static_cast<float>(kScaleFloor), static_cast<float>(kScaleFloor)};
  g.opacity = 0;
  return g;
}

// Genesis slices all carry target_frame 0 and are told apart by slice_index:
// genesis slice k sits in slot (k+1) mod swin_size and lives on [0, k+1).
inline Lifespan slice_lifespan(const SliceHeader& h, std::uint32_t swin_size) {
  if (h.target_frame == 0) {
    const FrameIndex expire = h.slice_index == 0 ? swin_size : h.slice_index;
    return {0, 0, expire};
  }
  return {h.target_frame, h.target_frame, h.target_frame + swin_size};
}

inline void write_slice_header(const SliceHeader& h, std::vector<std::uint8_t>& out) {
  bytes::put_tag(out, "SWGS");
  bytes::put_u32(out, h.target_frame);
  bytes::put_u8(out, h.slice_index);
  bytes::put_u32(out, h.kept_count);
  for (int i = 0; i < 3; ++i) bytes::put_u8(out, 0);
}

inline SliceHeader read_slice_header(bytes::Reader& r) {
  if (!r.tag_is("SWGS")) throw FormatError("slice: bad magic at offset " + std::to_string(r.offset() - 4));
  SliceHeader h;
  h.target_frame = r.u32();
  h.slice_index = r.u8();
  h.kept_count = r.u32();
  auto reserved = r.take(3);
  if (reserved[0] || reserved[1] || reserved[2]) throw FormatError("slice: reserved bytes must be zero");
  return h;
}

// Header followed by the first header.kept_count records of `records`.
template <typename T>
std::vector<std::uint8_t> pack_slice(const SliceHeader& header, std::span<const Gaussian<T>> records, Profile profile) {
  if (header.kept_count > records.size())
    throw InvalidParameter("pack_slice: kept_count " + std::to_string(header.kept_count) + " exceeds " +
                           std::to_string(records.size()) + " records");
  std::vector<std::uint8_t> out;
  out.reserve(kSliceHeaderBytes + header.kept_count * record_size(profile));
  write_slice_header(header, out);
  for (std::size_t i = 0; i < header.kept_count; ++i) encode_record(records[i], profile, out);
  return out;
}

inline std::size_t slice_bytes(std::uint32_t kept_count, Profile profile) {
  return kSliceHeaderBytes + kept_count * record_size(profile);
}

// Decodes one framed slice from the reader's position.
inline DecodedSlice unpack_slice(bytes::Reader& r, Profile profile, std::uint32_t slice_size, std::uint32_t swin_size) {
  DecodedSlice s;
  s.header = read_slice_header(r);
  if (s.header.kept_count > slice_size)
    throw FormatError("slice: kept_count " + std::to_string(s.header.kept_count) + " exceeds slice_size " +
                      std::to_string(slice_size));
  const auto payload = r.take(static_cast<std::size_t>(s.header.kept_count) * record_size(profile));
  s.records.reserve(slice_size);
  for (std::uint32_t i = 0; i < s.header.kept_count; ++i)
    s.records.push_back(decode_record(payload.subspan(i * record_size(profile), record_size(profile)), profile));
  s.records.resize(slice_size, padding_record());
  s.lifespan = slice_lifespan(s.header, swin_size);
  return s;
}

inline DecodedSlice unpack_slice(std::span<const std::uint8_t> data, Profile profile, std::uint32_t slice_size,
                                 std::uint32_t swin_size) {
  bytes::Reader r(data);
  DecodedSlice s = unpack_slice(r, profile, slice_size, swin_size);
  if (r.remaining() != 0) throw FormatError("slice: trailing bytes after payload");
  return s;
}

}  // namespace swings
