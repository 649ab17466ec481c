#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

// Small fixed-size linear algebra used by the splat math. Everything here is
// value-typed and constexpr-friendly; no heap, no expression templates.

namespace swings {

template <typename T>
struct Vec2 {
  T x{}, y{};

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(T s) const { return {x * s, y * s}; }
  constexpr bool operator==(const Vec2&) const = default;
};

template <typename T>
struct Vec3 {
  T x{}, y{}, z{};

  constexpr T& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr const T& operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(T s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  template <typename U>
  constexpr Vec3<U> cast() const {
    return {static_cast<U>(x), static_cast<U>(y), static_cast<U>(z)};
  }
};

template <typename T>
constexpr T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename T>
T norm(const Vec3<T>& a) {
  return std::sqrt(dot(a, a));
}

// Row-major 3x3.
template <typename T>
struct Mat3 {
  std::array<T, 9> m{};

  constexpr T& operator()(std::size_t r, std::size_t c) { return m[r * 3 + c]; }
  constexpr const T& operator()(std::size_t r, std::size_t c) const { return m[r * 3 + c]; }

  static constexpr Mat3 identity() { return Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }
  static constexpr Mat3 diagonal(const Vec3<T>& d) { return Mat3{{d.x, 0, 0, 0, d.y, 0, 0, 0, d.z}}; }

  constexpr Mat3 transposed() const {
    Mat3 t;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  constexpr Mat3 operator*(const Mat3& o) const {
    Mat3 out;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) {
        T acc{};
        for (std::size_t k = 0; k < 3; ++k) acc += (*this)(r, k) * o(k, c);
        out(r, c) = acc;
      }
    return out;
  }

  constexpr Vec3<T> operator*(const Vec3<T>& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  constexpr Mat3 operator+(const Mat3& o) const {
    Mat3 out;
    for (std::size_t i = 0; i < 9; ++i) out.m[i] = m[i] + o.m[i];
    return out;
  }

  constexpr Mat3 operator*(T s) const {
    Mat3 out;
    for (std::size_t i = 0; i < 9; ++i) out.m[i] = m[i] * s;
    return out;
  }

  constexpr bool operator==(const Mat3&) const = default;

  template <typename U>
  constexpr Mat3<U> cast() const {
    Mat3<U> out;
    for (std::size_t i = 0; i < 9; ++i) out.m[i] = static_cast<U>(m[i]);
    return out;
  }
};

// Symmetric 2x2 stored as (xx, xy, yy).
template <typename T>
struct Sym2 {
  T xx{}, xy{}, yy{};

  constexpr T det() const { return xx * yy - xy * xy; }
  constexpr Sym2 inverse() const {
    const T d = det();
    return {yy / d, -xy / d, xx / d};
  }
  T max_eigenvalue() const {
    const T mid = T(0.5) * (xx + yy);
    const T half_gap = std::sqrt(std::max(T(0), mid * mid - det()));
    return mid + half_gap;
  }
  constexpr bool operator==(const Sym2&) const = default;
};

// Unit quaternion (w, x, y, z); callers normalize explicitly.
template <typename T>
struct Quat {
  T w{1}, x{}, y{}, z{};

  T norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quat normalized() const {
    const T n = norm();
    return {w / n, x / n, y / n, z / n};
  }

  constexpr Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
  }

  constexpr T& operator[](std::size_t i) { return i == 0 ? w : (i == 1 ? x : (i == 2 ? y : z)); }
  constexpr const T& operator[](std::size_t i) const {
    return i == 0 ? w : (i == 1 ? x : (i == 2 ? y : z));
  }

  constexpr bool operator==(const Quat&) const = default;

  template <typename U>
  constexpr Quat<U> cast() const {
    return {static_cast<U>(w), static_cast<U>(x), static_cast<U>(y), static_cast<U>(z)};
  }

  static Quat from_axis_angle(const Vec3<T>& axis, T angle) {
    const T n = swings::norm(axis);
    const T s = std::sin(angle / 2) / n;
    return {std::cos(angle / 2), axis.x * s, axis.y * s, axis.z * s};
  }
};

// Rotation matrix of an already-normalized quaternion.
template <typename T>
constexpr Mat3<T> rotation_matrix(const Quat<T>& q) {
  const T w = q.w, x = q.x, y = q.y, z = q.z;
  return Mat3<T>{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                  2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                  2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
}

template <typename T>
constexpr T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

template <typename T>
constexpr T logit(T p) {
  return std::log(p / (T(1) - p));
}

}  // namespace swings
