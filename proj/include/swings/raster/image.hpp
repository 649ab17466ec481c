#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "swings/core/error.hpp"

namespace swings {

// Row-major linear RGB, three channels interleaved.
template <typename T>
struct Image {
  int width{};
  int height{};
  std::vector<T> pixels;

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, T(0)) {}

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * 3 + c;
  }
  T& at(int x, int y, int c) { return pixels[index(x, y, c)]; }
  const T& at(int x, int y, int c) const { return pixels[index(x, y, c)]; }

  std::size_t size() const { return pixels.size(); }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height; }

  template <typename U>
  Image<U> cast() const {
    Image<U> out(width, height);
    for (std::size_t i = 0; i < pixels.size(); ++i) out.pixels[i] = static_cast<U>(pixels[i]);
    return out;
  }

  bool operator==(const Image&) const = default;
};

// 10 log10(1 / MSE) across all channels; +inf for identical images.
template <typename T>
double psnr(const Image<T>& a, const Image<T>& b) {
  if (!a.same_shape(b)) throw InvalidParameter("psnr: image dimensions differ");
  if (a.pixels.empty()) throw InvalidParameter("psnr: empty image");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(a.pixels.size());
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace swings
