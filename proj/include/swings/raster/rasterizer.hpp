#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "swings/core/error.hpp"
#include "swings/core/gaussian.hpp"
#include "swings/core/math.hpp"
#include "swings/raster/image.hpp"

// CPU splat rasterizer. Pixel (x, y) is sampled at integer coordinates
// (x, y); the principal point is expressed in the same frame.
//
// Forward: project every Gaussian (first-order EWA), sort by (depth,
// source_index), bin into 16x16 tiles, then alpha-blend front to back per
// pixel. Backward replays the same per-pixel sequence in reverse.

namespace swings {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kAlphaMax = 0.999;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr double kDilation = 0.3;  // px^2 added to the 2D covariance diagonal
// Contributions with exp(power) below e^-25 are skipped. The jump this
// introduces is far below double-precision finite-difference resolution.
inline constexpr double kMinPower = -25.0;
inline constexpr int kTileSize = 16;

template <typename T>
struct Splat2D {
  Vec2<T> mean2d{};
  Sym2<T> cov2d{};  // before dilation
  T depth{};
  Vec3<T> color{};
  T opacity{};
  std::size_t source_index{};
};

// Gradients in optimization space: log-scale, opacity logit and the raw
// (pre-normalization) quaternion.
template <typename T>
struct GaussianGrad {
  Vec3<T> mean{};
  Vec3<T> log_scale{};
  Quat<T> rotation{0, 0, 0, 0};
  T opacity_logit{};
  Vec3<T> color{};
};

namespace detail {

// Everything the backward pass needs about one projected Gaussian.
template <typename T>
struct Projected {
  std::size_t source{};
  Vec3<T> mean_world{};
  Vec3<T> cam{};       // camera-space center
  Quat<T> qn{};        // normalized rotation
  T qnorm{};           // norm of the raw quaternion
  Mat3<T> rot{};       // R(qn)
  Vec3<T> scale{};
  Mat3<T> view_cov{};  // W Sigma W^T
  T j00{}, j02{}, j11{}, j12{};
  Vec2<T> mean2d{};
  Sym2<T> cov2d{};
  Sym2<T> conic{};     // (cov2d + dilation)^-1
  T opacity{};
  Vec3<T> color{};
  int x0{}, y0{}, x1{}, y1{};  // inclusive pixel bounds of the kMinPower footprint
};

template <typename T>
std::optional<Projected<T>> project_full(const Gaussian<T>& g, const Camera<T>& cam,
                                         std::size_t source) {
  Projected<T> p;
  p.source = source;
  p.mean_world = g.mean;
  p.cam = cam.to_camera(g.mean);
  if (!(p.cam.z > static_cast<T>(kNearPlane))) return std::nullopt;

  p.qnorm = g.rotation.norm();
  p.qn = {g.rotation.w / p.qnorm, g.rotation.x / p.qnorm, g.rotation.y / p.qnorm,
          g.rotation.z / p.qnorm};
  p.rot = rotation_matrix(p.qn);
  p.scale = g.scale;
  const Mat3<T> m = p.rot * Mat3<T>::diagonal(g.scale);
  const Mat3<T> sigma = m * m.transposed();
  p.view_cov = cam.rotation * sigma * cam.rotation.transposed();

  const T x = p.cam.x, y = p.cam.y, z = p.cam.z;
  const T iz = T(1) / z;
  p.j00 = cam.fx * iz;
  p.j02 = -cam.fx * x * iz * iz;
  p.j11 = cam.fy * iz;
  p.j12 = -cam.fy * y * iz * iz;
  p.mean2d = {cam.fx * x * iz + cam.cx, cam.fy * y * iz + cam.cy};

  // J V J^T with J = [[j00, 0, j02], [0, j11, j12]].
  const Mat3<T>& v = p.view_cov;
  const T a0 = p.j00 * v(0, 0) + p.j02 * v(2, 0);
  const T a1 = p.j00 * v(0, 1) + p.j02 * v(2, 1);
  const T a2 = p.j00 * v(0, 2) + p.j02 * v(2, 2);
  const T b1 = p.j11 * v(1, 1) + p.j12 * v(2, 1);
  const T b2 = p.j11 * v(1, 2) + p.j12 * v(2, 2);
  p.cov2d = {a0 * p.j00 + a2 * p.j02, a1 * p.j11 + a2 * p.j12, b1 * p.j11 + b2 * p.j12};

  const Sym2<T> dilated{p.cov2d.xx + static_cast<T>(kDilation), p.cov2d.xy,
                        p.cov2d.yy + static_cast<T>(kDilation)};
  if (!(dilated.det() > 0)) return std::nullopt;
  p.conic = dilated.inverse();

  const T lambda = dilated.max_eigenvalue();
  const T r3 = 3 * std::sqrt(lambda);
  if (p.mean2d.x + r3 < 0 || p.mean2d.x - r3 > cam.width - 1 || p.mean2d.y + r3 < 0 ||
      p.mean2d.y - r3 > cam.height - 1)
    return std::nullopt;

  const T r = std::sqrt(2 * static_cast<T>(-kMinPower) * lambda);
  p.x0 = std::max(0, static_cast<int>(std::floor(p.mean2d.x - r)));
  p.x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(p.mean2d.x + r)));
  p.y0 = std::max(0, static_cast<int>(std::floor(p.mean2d.y - r)));
  p.y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(p.mean2d.y + r)));

  p.opacity = g.opacity;
  p.color = g.color;
  return p;
}

}  // namespace detail

template <typename T>
std::optional<Splat2D<T>> project(const Gaussian<T>& g, const Camera<T>& cam,
                                  std::size_t source_index = 0) {
  const auto p = detail::project_full(g, cam, source_index);
  if (!p) return std::nullopt;
  return Splat2D<T>{p->mean2d, p->cov2d, p->cam.z, p->color, p->opacity, source_index};
}

// Saved forward-pass data consumed by render_backward.
template <typename T>
struct RasterState {
  int width{};
  int height{};
  std::size_t input_count{};
  std::vector<detail::Projected<T>> splats;  // visible, depth-sorted
  std::vector<std::uint32_t> tile_begin;     // CSR over tiles into tile_entries
  std::vector<std::uint32_t> tile_entries;   // indices into splats, depth order per tile
  std::vector<T> final_transmittance;        // per pixel
  std::vector<std::uint32_t> visited;        // per pixel: tile entries consumed
};

namespace detail {

inline int tiles_x(int width) { return (width + kTileSize - 1) / kTileSize; }
inline int tiles_y(int height) { return (height + kTileSize - 1) / kTileSize; }

template <typename T>
T splat_power(const Projected<T>& s, T dx, T dy) {
  return T(-0.5) * (s.conic.xx * dx * dx + s.conic.yy * dy * dy) - s.conic.xy * dx * dy;
}

}  // namespace detail

template <typename T>
Image<T> render(const Camera<T>& cam, std::span<const Gaussian<T>> gaussians,
                RasterState<T>* saved = nullptr) {
  cam.validate();
  RasterState<T> local;
  RasterState<T>& st = saved ? *saved : local;
  st.width = cam.width;
  st.height = cam.height;
  st.input_count = gaussians.size();
  st.splats.clear();

  for (std::size_t i = 0; i < gaussians.size(); ++i)
    if (auto p = detail::project_full(gaussians[i], cam, i)) st.splats.push_back(*p);

  std::sort(st.splats.begin(), st.splats.end(), [](const auto& a, const auto& b) {
    if (a.cam.z != b.cam.z) return a.cam.z < b.cam.z;
    return a.source < b.source;
  });

  const int ntx = detail::tiles_x(cam.width);
  const int nty = detail::tiles_y(cam.height);
  const std::size_t ntiles = static_cast<std::size_t>(ntx) * nty;
  st.tile_begin.assign(ntiles + 1, 0);
  for (const auto& s : st.splats)
    for (int ty = s.y0 / kTileSize; ty <= s.y1 / kTileSize; ++ty)
      for (int tx = s.x0 / kTileSize; tx <= s.x1 / kTileSize; ++tx)
        ++st.tile_begin[static_cast<std::size_t>(ty) * ntx + tx + 1];
  for (std::size_t t = 0; t < ntiles; ++t) st.tile_begin[t + 1] += st.tile_begin[t];
  st.tile_entries.assign(st.tile_begin.back(), 0);
  {
    std::vector<std::uint32_t> fill(st.tile_begin.begin(), st.tile_begin.end() - 1);
    for (std::uint32_t k = 0; k < st.splats.size(); ++k) {
      const auto& s = st.splats[k];
      for (int ty = s.y0 / kTileSize; ty <= s.y1 / kTileSize; ++ty)
        for (int tx = s.x0 / kTileSize; tx <= s.x1 / kTileSize; ++tx)
          st.tile_entries[fill[static_cast<std::size_t>(ty) * ntx + tx]++] = k;
    }
  }

  const std::size_t npix = static_cast<std::size_t>(cam.width) * cam.height;
  st.final_transmittance.assign(npix, T(1));
  st.visited.assign(npix, 0);
  Image<T> out(cam.width, cam.height);
  const T alpha_max = static_cast<T>(kAlphaMax);
  const T min_power = static_cast<T>(kMinPower);
  const T min_trans = static_cast<T>(kMinTransmittance);

  for (int ty = 0; ty < nty; ++ty)
    for (int tx = 0; tx < ntx; ++tx) {
      const std::size_t tile = static_cast<std::size_t>(ty) * ntx + tx;
      const std::uint32_t b = st.tile_begin[tile], e = st.tile_begin[tile + 1];
      const int py_end = std::min(cam.height, (ty + 1) * kTileSize);
      const int px_end = std::min(cam.width, (tx + 1) * kTileSize);
      for (int py = ty * kTileSize; py < py_end; ++py)
        for (int px = tx * kTileSize; px < px_end; ++px) {
          T trans = 1;
          T c0 = 0, c1 = 0, c2 = 0;
          std::uint32_t k = b;
          for (; k < e; ++k) {
            const auto& s = st.splats[st.tile_entries[k]];
            const T dx = T(px) - s.mean2d.x, dy = T(py) - s.mean2d.y;
            const T power = detail::splat_power(s, dx, dy);
            if (power < min_power) continue;
            const T alpha = std::min(alpha_max, s.opacity * std::exp(power));
            const T w = alpha * trans;
            c0 += s.color.x * w;
            c1 += s.color.y * w;
            c2 += s.color.z * w;
            trans *= (T(1) - alpha);
            if (trans < min_trans) {
              ++k;
              break;
            }
          }
          const std::size_t pix = static_cast<std::size_t>(py) * cam.width + px;
          st.final_transmittance[pix] = trans;
          st.visited[pix] = k - b;
          out.pixels[pix * 3 + 0] = c0;
          out.pixels[pix * 3 + 1] = c1;
          out.pixels[pix * 3 + 2] = c2;
        }
    }
  return out;
}

// Renders only the Gaussians active at `frame`; source_index then refers to
// the filtered set.
template <typename T>
Image<T> render(const Camera<T>& cam, std::span<const Gaussian<T>> gaussians,
                std::span<const Lifespan> lifespans, FrameIndex frame) {
  if (gaussians.size() != lifespans.size())
    throw InvalidParameter("render: gaussian and lifespan counts differ");
  std::vector<Gaussian<T>> active;
  for (std::size_t i = 0; i < gaussians.size(); ++i)
    if (is_active(lifespans[i], frame)) active.push_back(gaussians[i]);
  return render(cam, std::span<const Gaussian<T>>(active));
}

// dLoss/dparams for every input Gaussian given dLoss/dimage. Entries whose
// `trainable` flag is zero (or that were culled) get zero gradients.
template <typename T>
std::vector<GaussianGrad<T>> render_backward(const RasterState<T>& st, const Camera<T>& cam,
                                             std::span<const Gaussian<T>> gaussians,
                                             const Image<T>& grad_image,
                                             std::span<const std::uint8_t> trainable = {}) {
  if (gaussians.size() != st.input_count)
    throw ConsistencyError("render_backward: active set size differs from forward pass");
  if (!trainable.empty() && trainable.size() != gaussians.size())
    throw ConsistencyError("render_backward: trainable mask size mismatch");
  if (grad_image.width != st.width || grad_image.height != st.height)
    throw ConsistencyError("render_backward: gradient image shape mismatch");
  for (const auto& s : st.splats)
    if (!(gaussians[s.source].mean == s.mean_world))
      throw ConsistencyError("render_backward: active set differs from forward pass");

  struct Acc {
    T du{}, dv{};
    T qxx{}, qxy{}, qyy{};  // dL/dconic as a symmetric full matrix
    T dopacity{};
    Vec3<T> dcolor{};
  };
  std::vector<Acc> acc(st.splats.size());

  const int ntx = detail::tiles_x(st.width);
  const int nty = detail::tiles_y(st.height);
  const T alpha_max = static_cast<T>(kAlphaMax);
  const T min_power = static_cast<T>(kMinPower);

  for (int ty = 0; ty < nty; ++ty)
    for (int tx = 0; tx < ntx; ++tx) {
      const std::size_t tile = static_cast<std::size_t>(ty) * ntx + tx;
      const std::uint32_t b = st.tile_begin[tile];
      const int py_end = std::min(st.height, (ty + 1) * kTileSize);
      const int px_end = std::min(st.width, (tx + 1) * kTileSize);
      for (int py = ty * kTileSize; py < py_end; ++py)
        for (int px = tx * kTileSize; px < px_end; ++px) {
          const std::size_t pix = static_cast<std::size_t>(py) * st.width + px;
          const T g0 = grad_image.pixels[pix * 3 + 0];
          const T g1 = grad_image.pixels[pix * 3 + 1];
          const T g2 = grad_image.pixels[pix * 3 + 2];
          if (g0 == 0 && g1 == 0 && g2 == 0) continue;
          T trans = st.final_transmittance[pix];
          T behind0 = 0, behind1 = 0, behind2 = 0;
          for (std::uint32_t k = b + st.visited[pix]; k-- > b;) {
            const std::uint32_t si = st.tile_entries[k];
            const auto& s = st.splats[si];
            const T dx = T(px) - s.mean2d.x, dy = T(py) - s.mean2d.y;
            const T power = detail::splat_power(s, dx, dy);
            if (power < min_power) continue;
            const T gauss = std::exp(power);
            const T raw = s.opacity * gauss;
            const bool clamped = raw > alpha_max;
            const T alpha = clamped ? alpha_max : raw;
            trans = trans / (T(1) - alpha);
            Acc& a = acc[si];
            const T w = alpha * trans;
            a.dcolor.x += w * g0;
            a.dcolor.y += w * g1;
            a.dcolor.z += w * g2;
            const T dalpha = trans * (g0 * (s.color.x - behind0) + g1 * (s.color.y - behind1) +
                                      g2 * (s.color.z - behind2));
            behind0 = alpha * s.color.x + (T(1) - alpha) * behind0;
            behind1 = alpha * s.color.y + (T(1) - alpha) * behind1;
            behind2 = alpha * s.color.z + (T(1) - alpha) * behind2;
            if (clamped) continue;
            a.dopacity += dalpha * gauss;
            const T dpower = dalpha * alpha;
            a.du += dpower * (s.conic.xx * dx + s.conic.xy * dy);
            a.dv += dpower * (s.conic.xy * dx + s.conic.yy * dy);
            a.qxx += T(-0.5) * dpower * dx * dx;
            a.qxy += T(-0.5) * dpower * dx * dy;
            a.qyy += T(-0.5) * dpower * dy * dy;
          }
        }
    }

  std::vector<GaussianGrad<T>> grads(gaussians.size());
  const Mat3<T>& w = cam.rotation;
  for (std::size_t k = 0; k < st.splats.size(); ++k) {
    const auto& s = st.splats[k];
    if (!trainable.empty() && !trainable[s.source]) continue;
    const Acc& a = acc[k];
    GaussianGrad<T>& out = grads[s.source];
    out.color = a.dcolor;
    out.opacity_logit = a.dopacity * s.opacity * (T(1) - s.opacity);

    // dL/dcov2d = -Q dL/dQ Q (all symmetric).
    const Sym2<T>& q = s.conic;
    const T m00 = a.qxx * q.xx + a.qxy * q.xy, m01 = a.qxx * q.xy + a.qxy * q.yy;
    const T m10 = a.qxy * q.xx + a.qyy * q.xy, m11 = a.qxy * q.xy + a.qyy * q.yy;
    const T gc00 = -(q.xx * m00 + q.xy * m10);
    const T gc01 = -(q.xx * m01 + q.xy * m11);
    const T gc11 = -(q.xy * m01 + q.yy * m11);

    // cov2d = J V J^T. dL/dV = J^T G J, dL/dJ = 2 G J V.
    Mat3<T> jm{};
    jm(0, 0) = s.j00;
    jm(0, 2) = s.j02;
    jm(1, 1) = s.j11;
    jm(1, 2) = s.j12;  // row 2 stays zero; J embedded as 3x3
    Mat3<T> gm{};
    gm(0, 0) = gc00;
    gm(0, 1) = gc01;
    gm(1, 0) = gc01;
    gm(1, 1) = gc11;
    const Mat3<T> dv = jm.transposed() * gm * jm;
    const Mat3<T> dj = (gm * jm * s.view_cov) * T(2);

    // Chain J and the projected mean back to the camera-space point.
    const T x = s.cam.x, y = s.cam.y, z = s.cam.z;
    const T iz = T(1) / z, iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3<T> dcam{};
    dcam.x = a.du * cam.fx * iz + dj(0, 2) * (-cam.fx * iz2);
    dcam.y = a.dv * cam.fy * iz + dj(1, 2) * (-cam.fy * iz2);
    dcam.z = a.du * (-cam.fx * x * iz2) + a.dv * (-cam.fy * y * iz2) + dj(0, 0) * (-cam.fx * iz2) +
             dj(0, 2) * (2 * cam.fx * x * iz3) + dj(1, 1) * (-cam.fy * iz2) +
             dj(1, 2) * (2 * cam.fy * y * iz3);
    out.mean = w.transposed() * dcam;

    // V = W Sigma W^T, Sigma = M M^T, M = R S.
    const Mat3<T> dsigma = w.transposed() * dv * w;
    const Mat3<T> mm = s.rot * Mat3<T>::diagonal(s.scale);
    const Mat3<T> dm = (dsigma + dsigma.transposed()) * mm;
    Mat3<T> dr;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) dr(r, c) = dm(r, c) * s.scale[c];
    for (int c = 0; c < 3; ++c) {
      T ds = 0;
      for (int r = 0; r < 3; ++r) ds += dm(r, c) * s.rot(r, c);
      out.log_scale[c] = ds * s.scale[c];
    }

    const T qw = s.qn.w, qx = s.qn.x, qy = s.qn.y, qz = s.qn.z;
    const Quat<T> dqn{
        2 * (-qz * dr(0, 1) + qy * dr(0, 2) + qz * dr(1, 0) - qx * dr(1, 2) - qy * dr(2, 0) +
             qx * dr(2, 1)),
        2 * (qy * dr(0, 1) + qz * dr(0, 2) + qy * dr(1, 0) - 2 * qx * dr(1, 1) - qw * dr(1, 2) +
             qz * dr(2, 0) + qw * dr(2, 1) - 2 * qx * dr(2, 2)),
        2 * (-2 * qy * dr(0, 0) + qx * dr(0, 1) + qw * dr(0, 2) + qx * dr(1, 0) + qz * dr(1, 2) -
             qw * dr(2, 0) + qz * dr(2, 1) - 2 * qy * dr(2, 2)),
        2 * (-2 * qz * dr(0, 0) - qw * dr(0, 1) + qx * dr(0, 2) + qw * dr(1, 0) -
             2 * qz * dr(1, 1) + qy * dr(1, 2) + qx * dr(2, 0) + qy * dr(2, 1))};
    const T proj = qw * dqn.w + qx * dqn.x + qy * dqn.y + qz * dqn.z;
    out.rotation = {(dqn.w - qw * proj) / s.qnorm, (dqn.x - qx * proj) / s.qnorm,
                    (dqn.y - qy * proj) / s.qnorm, (dqn.z - qz * proj) / s.qnorm};
  }
  return grads;
}

}  // namespace swings
