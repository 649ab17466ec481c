#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "swings/core/error.hpp"
#include "swings/raster/image.hpp"

namespace swings {

inline double linear_to_srgb(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

inline double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

inline std::uint8_t encode_srgb8(double linear) {
  return static_cast<std::uint8_t>(std::lround(linear_to_srgb(linear) * 255.0));
}

inline const std::array<double, 256>& srgb8_decode_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) t[i] = srgb_to_linear(i / 255.0);
    return t;
  }();
  return table;
}

// Round trip through 8-bit sRGB, i.e. what write_png followed by read_png yields.
template <typename T>
Image<T> quantize_srgb8(const Image<T>& img) {
  const auto& table = srgb8_decode_table();
  Image<T> out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = static_cast<T>(table[encode_srgb8(static_cast<double>(img.pixels[i]))]);
  return out;
}

template <typename T>
std::vector<std::uint8_t> to_srgb8(const Image<T>& img) {
  std::vector<std::uint8_t> bytes(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    bytes[i] = encode_srgb8(static_cast<double>(img.pixels[i]));
  return bytes;
}

template <typename T>
void write_png(const std::filesystem::path& path, const Image<T>& img) {
  const std::vector<std::uint8_t> bytes = to_srgb8(img);
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width);
  desc.height = static_cast<png_uint_32>(img.height);
  desc.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&desc, path.string().c_str(), 0, bytes.data(), 0, nullptr))
    throw IoError("write_png: " + path.string() + ": " + desc.message);
}

template <typename T>
Image<T> read_png(const std::filesystem::path& path) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&desc, path.string().c_str()))
    throw IoError("read_png: " + path.string() + ": " + desc.message);
  desc.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(desc));
  if (!png_image_finish_read(&desc, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&desc);
    throw IoError("read_png: " + path.string() + ": " + desc.message);
  }
  const auto& table = srgb8_decode_table();
  Image<T> img(static_cast<int>(desc.width), static_cast<int>(desc.height));
  for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = static_cast<T>(table[bytes[i]]);
  return img;
}

}  // namespace swings
