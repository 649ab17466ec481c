#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "swings/core/error.hpp"
#include "swings/core/math.hpp"

namespace swings {

using FrameIndex = std::uint32_t;

// Below this a Gaussian's covariance is treated as singular.
inline constexpr double kScaleFloor = 1e-6;

// One splat. Color is the dc term only, linear RGB.
template <typename T>
struct Gaussian {
  Vec3<T> mean{};
  Quat<T> rotation{};
  Vec3<T> scale{T(1), T(1), T(1)};
  T opacity{};
  Vec3<T> color{};

  constexpr bool operator==(const Gaussian&) const = default;

  template <typename U>
  Gaussian<U> cast() const {
    return {mean.template cast<U>(), rotation.template cast<U>(), scale.template cast<U>(),
            static_cast<U>(opacity), color.template cast<U>()};
  }
};

// Frame interval [start, expire) during which a Gaussian renders. birth
// identifies the generation and, modulo the window, its buffer slot.
struct Lifespan {
  FrameIndex birth{};
  FrameIndex start{};
  FrameIndex expire{};

  constexpr bool operator==(const Lifespan&) const = default;

  bool valid(std::uint32_t swin_size) const {
    return start <= expire && expire - start <= swin_size && birth <= start;
  }
};

constexpr bool is_active(const Lifespan& life, FrameIndex frame) {
  return life.start <= frame && frame < life.expire;
}

constexpr std::uint32_t slice_slot(FrameIndex birth, std::uint32_t swin_size) {
  return birth % swin_size;
}

// Pinhole camera. world_to_camera maps world points into a frame where +z
// looks forward, +x right and +y down the image.
template <typename T>
struct Camera {
  int width{};
  int height{};
  T fx{}, fy{}, cx{}, cy{};
  Mat3<T> rotation = Mat3<T>::identity();
  Vec3<T> translation{};

  void validate() const {
    if (width <= 0 || height <= 0) throw InvalidParameter("camera: image size must be positive");
    if (!(fx > 0) || !(fy > 0)) throw InvalidParameter("camera: focal lengths must be positive");
    if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
      throw InvalidParameter("camera: principal point outside the image");
  }

  Vec3<T> to_camera(const Vec3<T>& world) const { return rotation * world + translation; }

  template <typename U>
  Camera<U> cast() const {
    return {width,
            height,
            static_cast<U>(fx),
            static_cast<U>(fy),
            static_cast<U>(cx),
            static_cast<U>(cy),
            rotation.template cast<U>(),
            translation.template cast<U>()};
  }
};

// World-to-camera transform for a camera at `eye` looking at `target`.
template <typename T>
Camera<T> look_at(int width, int height, T fx, T fy, const Vec3<T>& eye, const Vec3<T>& target,
                  const Vec3<T>& up = {0, -1, 0}) {
  Vec3<T> fwd = target - eye;
  fwd = fwd * (T(1) / norm(fwd));
  // right = fwd x up, then down = fwd x right keeps a right-handed frame.
  Vec3<T> right{fwd.y * up.z - fwd.z * up.y, fwd.z * up.x - fwd.x * up.z,
                fwd.x * up.y - fwd.y * up.x};
  right = right * (T(1) / norm(right));
  const Vec3<T> down{fwd.y * right.z - fwd.z * right.y, fwd.z * right.x - fwd.x * right.z,
                     fwd.x * right.y - fwd.y * right.x};
  Camera<T> cam;
  cam.width = width;
  cam.height = height;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = T(width) / 2;
  cam.cy = T(height) / 2;
  cam.rotation = Mat3<T>{{right.x, right.y, right.z, down.x, down.y, down.z, fwd.x, fwd.y, fwd.z}};
  cam.translation = (cam.rotation * eye) * T(-1);
  return cam;
}

struct StreamParams {
  std::uint32_t swin_size{};
  std::uint32_t num_gs{};
  double fps{};
  std::uint32_t bytes_per_gaussian{};
  std::uint32_t total_frames{};

  std::uint32_t slice_size() const { return num_gs / swin_size; }

  void validate() const {
    if (swin_size == 0) throw InvalidParameter("swin_size must be positive");
    if (num_gs == 0 || num_gs % swin_size != 0)
      throw InvalidParameter("num_gs must be a positive multiple of swin_size");
    if (fps < 0) throw InvalidParameter("fps must be non-negative");
  }
};

// Sigma = R S S^T R^T.
template <typename T>
Mat3<T> covariance(const Quat<T>& rotation, const Vec3<T>& scale) {
  if (!(scale.x > 0 && scale.y > 0 && scale.z > 0))
    throw InvalidParameter("covariance: scale components must be positive");
  const Mat3<T> r = rotation_matrix(rotation.normalized());
  const Mat3<T> rs = r * Mat3<T>::diagonal(scale);
  return rs * rs.transposed();
}

// exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)), evaluated through the factorization
// Sigma^-1 = R S^-2 R^T so no explicit inverse is formed.
template <typename T>
T intensity(const Gaussian<T>& g, const Vec3<T>& point) {
  const T floor = static_cast<T>(kScaleFloor);
  if (!(g.scale.x >= floor && g.scale.y >= floor && g.scale.z >= floor))
    throw InvalidParameter("intensity: scale below floor");
  const Mat3<T> r = rotation_matrix(g.rotation.normalized());
  const Vec3<T> local = r.transposed() * (point - g.mean);
  const Vec3<T> w{local.x / g.scale.x, local.y / g.scale.y, local.z / g.scale.z};
  return std::exp(T(-0.5) * dot(w, w));
}

}  // namespace swings
