#pragma once

#include "swings/codec/slice.hpp"
#include "swings/core/gaussian.hpp"

namespace swings {

struct Bandwidth {
  double payload_bytes_per_second{};  // fps * slice_size * bytes_per_gaussian
  double header_bytes_per_second{};   // one slice header per frame
  double total() const { return payload_bytes_per_second + header_bytes_per_second; }
};

inline Bandwidth bandwidth(const StreamParams& p) {
  p.validate();
  return {p.fps * static_cast<double>(p.slice_size()) * p.bytes_per_gaussian,
          p.fps * static_cast<double>(kSliceHeaderBytes)};
}

}  // namespace swings
