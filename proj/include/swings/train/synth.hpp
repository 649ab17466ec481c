#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "swings/core/gaussian.hpp"
#include "swings/raster/png_io.hpp"
#include "swings/raster/rasterizer.hpp"
#include "swings/train/dataset.hpp"

namespace swings {

struct AnimatedGaussian {
  Gaussian<double> base;
  Vec3<double> jitter_amplitude;
  Vec3<double> jitter_phase;
  Lifespan life;  // frames in which the splat exists
};

// Known animated scene: shared rigid drift, per-splat sinusoidal jitter and a
// few blobs that enter or leave mid-sequence.
struct GroundTruth {
  std::vector<AnimatedGaussian> splats;
  Vec3<double> drift_per_frame{};
  double jitter_period = 12.0;  // frames

  Gaussian<double> state(const AnimatedGaussian& a, FrameIndex f) const {
    Gaussian<double> g = a.base;
    const double t = 2 * std::numbers::pi * f / jitter_period;
    for (int k = 0; k < 3; ++k)
      g.mean[k] += drift_per_frame[k] * f + a.jitter_amplitude[k] * std::sin(t + a.jitter_phase[k]);
    return g;
  }

  std::vector<Gaussian<double>> at(FrameIndex f) const {
    std::vector<Gaussian<double>> out;
    for (const auto& a : splats)
      if (is_active(a.life, f)) out.push_back(state(a, f));
    return out;
  }
};

struct SynthOptions {
  std::uint64_t seed = 7;
  std::uint32_t total_frames = 20;
  std::uint32_t n_views = 4;
  std::uint32_t n_gaussians = 300;
  int width = 64;
  int height = 64;
  double focal = 70;
  double distance = 4;
};

// Forward-facing rig around the -z axis: a center view followed by views
// offset in azimuth and elevation (degrees).
inline std::vector<Camera<double>> synth_cameras(std::uint32_t n_views, int width, int height, double focal,
                                                 double distance) {
  static constexpr double kOffsets[][2] = {{0, 0},   {15, 0},   {-15, 0},  {0, 12},  {15, 12},
                                           {-15, 12}, {0, -12}, {15, -12}, {-15, -12}};
  std::vector<Camera<double>> cams;
  for (std::uint32_t v = 0; v < n_views; ++v) {
    const std::uint32_t ring = v / 9;
    const double az = kOffsets[v % 9][0] * (1 + 0.5 * ring) * std::numbers::pi / 180;
    const double el = kOffsets[v % 9][1] * (1 + 0.5 * ring) * std::numbers::pi / 180;
    const Vec3<double> eye{distance * std::sin(az) * std::cos(el), -distance * std::sin(el),
                           -distance * std::cos(az) * std::cos(el)};
    cams.push_back(look_at<double>(width, height, focal, focal, eye, {0, 0, 0}));
  }
  return cams;
}

inline GroundTruth synth_truth(const SynthOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> pos(-0.9, 0.9), sc(0.04, 0.12), op(0.6, 0.95), col(0.1, 0.95),
      amp(0.005, 0.02), phase(0, 2 * std::numbers::pi), unit(0, 1);
  std::normal_distribution<double> nq(0, 1);
  GroundTruth gt;
  gt.drift_per_frame = {0.004, -0.002, 0.001};
  const std::uint32_t frames = opt.total_frames;
  for (std::uint32_t i = 0; i < opt.n_gaussians; ++i) {
    AnimatedGaussian a;
    a.base.mean = {pos(rng), pos(rng), pos(rng)};
    a.base.rotation = Quat<double>{nq(rng), nq(rng), nq(rng), nq(rng)}.normalized();
    a.base.scale = {sc(rng), sc(rng), sc(rng)};
    a.base.opacity = op(rng);
    a.base.color = {col(rng), col(rng), col(rng)};
    a.jitter_amplitude = {amp(rng), amp(rng), amp(rng)};
    a.jitter_phase = {phase(rng), phase(rng), phase(rng)};
    a.life = {0, 0, frames};
    const double u = unit(rng);
    if (frames > 2 && u < 0.05) {
      // Exits at a frame in [frames/3, frames).
      const auto exit = static_cast<FrameIndex>(frames / 3 + unit(rng) * (frames - frames / 3));
      a.life = {0, 0, std::max<FrameIndex>(exit, 1)};
    } else if (frames > 2 && u < 0.10) {
      const auto enter = static_cast<FrameIndex>(1 + unit(rng) * (2 * frames / 3));
      a.life = {enter, enter, frames};
    }
    gt.splats.push_back(a);
  }
  return gt;
}

struct SynthResult {
  GroundTruth truth;
  DatasetInfo info;
  std::filesystem::path root;

  FrameDataset dataset(std::size_t max_cached) const { return FrameDataset(root, max_cached); }
};

// Renders the ground truth from every camera into `root` using the dataset
// directory convention.
inline SynthResult synth_scene(const SynthOptions& opt, const std::filesystem::path& root) {
  if (opt.total_frames == 0 || opt.n_views == 0 || opt.width <= 0 || opt.height <= 0)
    throw InvalidParameter("synth_scene: frames, views and image size must be positive");
  SynthResult out;
  out.truth = synth_truth(opt);
  out.root = root;
  out.info.width = opt.width;
  out.info.height = opt.height;
  out.info.total_frames = opt.total_frames;
  out.info.cameras = synth_cameras(opt.n_views, opt.width, opt.height, opt.focal, opt.distance);
  const double reach = 1.0 + 0.02 + 0.004 * opt.total_frames;
  out.info.bounds = {-reach, -reach, -reach, reach, reach, reach};
  std::filesystem::create_directories(root);
  write_dataset_info(root, out.info);
  for (FrameIndex f = 0; f < opt.total_frames; ++f) {
    const auto gs = out.truth.at(f);
    for (std::uint32_t v = 0; v < opt.n_views; ++v) {
      const auto path = frame_image_path(root, f, v);
      std::filesystem::create_directories(path.parent_path());
      write_png(path, render(out.info.cameras[v], std::span<const Gaussian<double>>(gs)));
    }
  }
  return out;
}

}  // namespace swings
