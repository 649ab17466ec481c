#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "swings/codec/container.hpp"
#include "swings/codec/slice.hpp"
#include "swings/core/error.hpp"
#include "swings/core/gaussian.hpp"
#include "swings/raster/rasterizer.hpp"
#include "swings/train/adam.hpp"
#include "swings/train/dataset.hpp"
#include "swings/train/loss.hpp"
#include "swings/train/params.hpp"

namespace swings {

struct TrainConfig {
  std::uint32_t swin_size = 5;
  std::uint32_t num_gs = 500;
  std::uint32_t genesis_iterations = 30000;
  std::uint32_t window_iterations = 2000;
  std::uint32_t relocate_period = 100;
  double noise_lr = 5e4;
  double scale_reg = 1e-2;
  double opacity_reg = 2e-2;
  double ssim_weight = 0.2;
  AdamRates lr;
  double mean_lr_final_ratio = 0.01;  // exponential decay of the mean rate across each window
  double spatial_scale = 0;           // 0: half the diagonal of the dataset bounds
  double gradient_scale_decay = 0.5;
  bool gradient_scaling = true;
  double dead_opacity_threshold = 0.005;
  double noise_gate_sharpness = 100;
  double noise_gate_center = 0.005;
  std::uint32_t max_cached_frames = 16;
  std::uint64_t rng_seed = 0;
  bool random_reinit = false;
  double init_opacity = 0.1;
  Profile profile = Profile::kQuantized;
  std::vector<std::uint32_t> holdout_views;
  std::string init_points;
  double fps = 30;

  void validate() const {
    auto positive = [](std::uint64_t v, const char* name) {
      if (v == 0) throw InvalidParameter(std::string(name) + " must be positive");
    };
    positive(swin_size, "swin_size");
    positive(num_gs, "num_gs");
    positive(genesis_iterations, "genesis_iterations");
    positive(window_iterations, "window_iterations");
    positive(relocate_period, "relocate_period");
    positive(max_cached_frames, "max_cached_frames");
    if (num_gs % swin_size != 0) throw InvalidParameter("num_gs must be divisible by swin_size");
    if (swin_size > 256) throw InvalidParameter("swin_size must be at most 256");
    auto unit = [](double v, const char* name) {
      if (!(v > 0 && v < 1)) throw InvalidParameter(std::string(name) + " must lie in (0,1)");
    };
    unit(dead_opacity_threshold, "dead_opacity_threshold");
    unit(gradient_scale_decay, "gradient_scale_decay");
    unit(init_opacity, "init_opacity");
    if (!(mean_lr_final_ratio > 0 && mean_lr_final_ratio <= 1))
      throw InvalidParameter("mean_lr_final_ratio must lie in (0,1]");
    if (!(ssim_weight >= 0 && ssim_weight <= 1)) throw InvalidParameter("ssim_weight must lie in [0,1]");
    if (noise_lr < 0 || scale_reg < 0 || opacity_reg < 0 || spatial_scale < 0 || fps < 0)
      throw InvalidParameter("noise_lr, regularizers, spatial_scale and fps must be non-negative");
  }

  nlohmann::json to_json() const {
    return {{"swin_size", swin_size},
            {"num_gs", num_gs},
            {"genesis_iterations", genesis_iterations},
            {"window_iterations", window_iterations},
            {"relocate_period", relocate_period},
            {"noise_lr", noise_lr},
            {"scale_reg", scale_reg},
            {"opacity_reg", opacity_reg},
            {"ssim_weight", ssim_weight},
            {"lr_mean", lr.mean},
            {"lr_log_scale", lr.log_scale},
            {"lr_rotation", lr.rotation},
            {"lr_opacity", lr.opacity},
            {"lr_color", lr.color},
            {"mean_lr_final_ratio", mean_lr_final_ratio},
            {"spatial_scale", spatial_scale},
            {"gradient_scale_decay", gradient_scale_decay},
            {"gradient_scaling", gradient_scaling},
            {"dead_opacity_threshold", dead_opacity_threshold},
            {"noise_gate_sharpness", noise_gate_sharpness},
            {"noise_gate_center", noise_gate_center},
            {"max_cached_frames", max_cached_frames},
            {"rng_seed", rng_seed},
            {"random_reinit", random_reinit},
            {"init_opacity", init_opacity},
            {"profile", static_cast<int>(profile)},
            {"holdout_views", holdout_views},
            {"init_points", init_points},
            {"fps", fps}};
  }

  // Applies the keys present in `j` on top of the current values.
  void merge_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidParameter("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      try {
        if (k == "swin_size") swin_size = v.get<std::uint32_t>();
        else if (k == "num_gs") num_gs = v.get<std::uint32_t>();
        else if (k == "genesis_iterations") genesis_iterations = v.get<std::uint32_t>();
        else if (k == "window_iterations") window_iterations = v.get<std::uint32_t>();
        else if (k == "relocate_period") relocate_period = v.get<std::uint32_t>();
        else if (k == "noise_lr") noise_lr = v.get<double>();
        else if (k == "scale_reg") scale_reg = v.get<double>();
        else if (k == "opacity_reg") opacity_reg = v.get<double>();
        else if (k == "ssim_weight") ssim_weight = v.get<double>();
        else if (k == "lr_mean") lr.mean = v.get<double>();
        else if (k == "lr_log_scale") lr.log_scale = v.get<double>();
        else if (k == "lr_rotation") lr.rotation = v.get<double>();
        else if (k == "lr_opacity") lr.opacity = v.get<double>();
        else if (k == "lr_color") lr.color = v.get<double>();
        else if (k == "mean_lr_final_ratio") mean_lr_final_ratio = v.get<double>();
        else if (k == "spatial_scale") spatial_scale = v.get<double>();
        else if (k == "gradient_scale_decay") gradient_scale_decay = v.get<double>();
        else if (k == "gradient_scaling") gradient_scaling = v.get<bool>();
        else if (k == "dead_opacity_threshold") dead_opacity_threshold = v.get<double>();
        else if (k == "noise_gate_sharpness") noise_gate_sharpness = v.get<double>();
        else if (k == "noise_gate_center") noise_gate_center = v.get<double>();
        else if (k == "max_cached_frames") max_cached_frames = v.get<std::uint32_t>();
        else if (k == "rng_seed") rng_seed = v.get<std::uint64_t>();
        else if (k == "random_reinit") random_reinit = v.get<bool>();
        else if (k == "init_opacity") init_opacity = v.get<double>();
        else if (k == "profile") profile = profile_from_id(v.get<std::uint32_t>());
        else if (k == "holdout_views") holdout_views = v.get<std::vector<std::uint32_t>>();
        else if (k == "init_points") init_points = v.get<std::string>();
        else if (k == "fps") fps = v.get<double>();
        else throw InvalidParameter("unknown config key '" + k + "'");
      } catch (const nlohmann::json::exception& e) {
        throw InvalidParameter("config key '" + k + "': " + e.what());
      } catch (const FormatError& e) {
        throw InvalidParameter("config key '" + k + "': " + e.what());
      }
    }
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.merge_json(j);
    c.validate();
    return c;
  }

  static TrainConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidParameter(path.string() + ": " + e.what());
    }
  }
};

struct OptimizableSlice {
  std::uint32_t index{};  // genesis slice number; its player slot is (index + 1) % swin_size
  Lifespan life;
  std::uint32_t windows_trained = 0;
  std::vector<ParamVec> params;
  std::vector<AdamState> adam;

  std::vector<Gaussian<double>> gaussians() const {
    std::vector<Gaussian<double>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(from_params(p));
    return out;
  }
};

struct MaturedGeneration {
  std::uint32_t slice{};
  Lifespan life;
  std::vector<Gaussian<double>> gaussians;
};

struct SliceState {
  std::uint32_t swin_size{};
  std::uint32_t num_gs{};
  double spatial_scale = 1;
  std::array<double, 6> bounds{};
  std::vector<OptimizableSlice> slices;
  std::deque<MaturedGeneration> matured;  // at most num_gs records, oldest first
  bool expire_scheduled = false;
  std::mt19937_64 rng;

  std::uint32_t slice_size() const { return num_gs / swin_size; }

  std::size_t matured_records() const {
    std::size_t n = 0;
    for (const auto& g : matured) n += g.gaussians.size();
    return n;
  }
};

// Wire header for an archived generation. Genesis slices share target_frame 0
// and are distinguished by their slot.
inline SliceHeader generation_header(const MaturedGeneration& g, std::uint32_t swin_size) {
  const auto slot = static_cast<std::uint8_t>(g.life.birth == 0 ? g.life.expire % swin_size
                                                                : slice_slot(g.life.birth, swin_size));
  return {g.life.birth, slot, static_cast<std::uint32_t>(g.gaussians.size())};
}

inline std::vector<std::uint8_t> encode_generation(const MaturedGeneration& g, std::uint32_t swin_size,
                                                   Profile profile) {
  return pack_slice(generation_header(g, swin_size), std::span<const Gaussian<double>>(g.gaussians), profile);
}

// ---------------------------------------------------------------------------
// Per-Gaussian operations on the optimizable active set.

struct ActiveRef {
  ParamVec* params;
  AdamState* adam;
};

inline double gradient_scale(std::uint32_t windows_trained, double gamma) {
  return std::pow(gamma, static_cast<double>(windows_trained));
}

inline double noise_gate(double opacity, double sharpness, double center) {
  return sigmoid(-sharpness * (opacity - center));
}

// mean += noise_lr * mean_lr * gate(alpha) * R diag(s) eta, eta ~ N(0, I).
inline void sgld_perturb(std::span<const ActiveRef> active, double mean_lr, double noise_lr, double sharpness,
                         double center, std::mt19937_64& rng) {
  if (noise_lr == 0 || mean_lr == 0) return;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& ref : active) {
    ParamVec& p = *ref.params;
    const double eta[3] = {normal(rng), normal(rng), normal(rng)};
    const double amount = noise_lr * mean_lr * noise_gate(sigmoid(p[10]), sharpness, center);
    const Quat<double> q = Quat<double>{p[6], p[7], p[8], p[9]}.normalized();
    const Mat3<double> r = rotation_matrix(q);
    const Vec3<double> local{std::exp(p[3]) * eta[0], std::exp(p[4]) * eta[1], std::exp(p[5]) * eta[2]};
    const Vec3<double> d = r * local;
    for (int k = 0; k < 3; ++k) p[k] += amount * d[k];
  }
}

inline double relocated_opacity(double o, std::size_t clones) {
  return 1.0 - std::pow(1.0 - o, 1.0 / static_cast<double>(clones + 1));
}

struct RelocateStats {
  std::size_t dead = 0;
  std::size_t targets = 0;
  bool no_alive = false;
};

// Moves every Gaussian with opacity below `threshold` onto an alive one drawn
// with probability proportional to opacity. Each target hit by N clones and
// the clones themselves take opacity 1 - (1 - o)^(1/(N+1)); clones copy the
// target's mean, rotation and color with scale divided by sqrt(N+1).
inline RelocateStats relocate(std::span<const ActiveRef> active, double threshold, std::mt19937_64& rng) {
  RelocateStats stats;
  std::vector<std::size_t> dead, alive;
  std::vector<double> weights;
  for (std::size_t i = 0; i < active.size(); ++i) {
    const double o = sigmoid((*active[i].params)[10]);
    if (o < threshold) {
      dead.push_back(i);
    } else {
      alive.push_back(i);
      weights.push_back(o);
    }
  }
  stats.dead = dead.size();
  if (dead.empty()) return stats;
  if (alive.empty()) {
    stats.no_alive = true;
    return stats;
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::map<std::size_t, std::vector<std::size_t>> clones_of;  // ordered for determinism
  for (std::size_t d : dead) clones_of[alive[pick(rng)]].push_back(d);
  stats.targets = clones_of.size();
  for (const auto& [t, clones] : clones_of) {
    ParamVec& target = *active[t].params;
    const double o_new = relocated_opacity(sigmoid(target[10]), clones.size());
    const double new_logit = logit(std::clamp(o_new, 1e-12, 1.0 - 1e-12));
    const double shrink = 0.5 * std::log(static_cast<double>(clones.size() + 1));
    for (std::size_t c : clones) {
      ParamVec& p = *active[c].params;
      p = target;
      for (int k = 3; k < 6; ++k) p[k] = target[k] - shrink;
      p[10] = new_logit;
      active[c].adam->reset();
    }
    target[10] = new_logit;
    active[t].adam->reset();
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Initialization.

namespace detail {

// sqrt of the mean squared distance to the three nearest neighbours, via a
// uniform grid so large point sets stay near-linear.
inline std::vector<double> neighbour_scales(const std::vector<Vec3<double>>& pts) {
  const std::size_t n = pts.size();
  std::vector<double> out(n, 0.01);
  if (n < 2) return out;
  Vec3<double> lo = pts[0], hi = pts[0];
  for (const auto& p : pts)
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z, 1e-9});
  const int res = std::max(1, static_cast<int>(std::cbrt(static_cast<double>(n) / 2.0)));
  const double cell = extent / res + 1e-12;
  auto coord = [&](double v, int k) { return std::clamp(static_cast<int>((v - lo[k]) / cell), 0, res - 1); };
  std::vector<std::vector<std::size_t>> grid(static_cast<std::size_t>(res) * res * res);
  auto at = [&](int x, int y, int z) -> std::vector<std::size_t>& {
    return grid[(static_cast<std::size_t>(z) * res + y) * res + x];
  };
  for (std::size_t i = 0; i < n; ++i) at(coord(pts[i].x, 0), coord(pts[i].y, 1), coord(pts[i].z, 2)).push_back(i);
  const std::size_t want = std::min<std::size_t>(3, n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const int cx = coord(pts[i].x, 0), cy = coord(pts[i].y, 1), cz = coord(pts[i].z, 2);
    std::vector<double> best;  // ascending squared distances, at most `want`
    for (int ring = 0; ring <= res; ++ring) {
      for (int z = cz - ring; z <= cz + ring; ++z)
        for (int y = cy - ring; y <= cy + ring; ++y)
          for (int x = cx - ring; x <= cx + ring; ++x) {
            if (std::max({std::abs(x - cx), std::abs(y - cy), std::abs(z - cz)}) != ring) continue;
            if (x < 0 || y < 0 || z < 0 || x >= res || y >= res || z >= res) continue;
            for (std::size_t j : at(x, y, z)) {
              if (j == i) continue;
              const Vec3<double> d = pts[j] - pts[i];
              const double d2 = dot(d, d);
              if (best.size() < want || d2 < best.back()) {
                best.insert(std::upper_bound(best.begin(), best.end(), d2), d2);
                if (best.size() > want) best.pop_back();
              }
            }
          }
      // Anything outside this ring is at least ring * cell away.
      if (best.size() == want && best.back() <= (ring * cell) * (ring * cell)) break;
    }
    double mean = 0;
    for (double d2 : best) mean += d2;
    out[i] = std::max(std::sqrt(mean / static_cast<double>(best.size())), 1e-4);
  }
  return out;
}

inline std::vector<std::array<double, 6>> read_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point file " + path.string());
  std::vector<std::array<double, 6>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::array<double, 6> r{};
    for (double& v : r)
      if (!(ss >> v)) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected x y z r g b");
    rows.push_back(r);
  }
  bool bytes = false;
  for (const auto& r : rows)
    if (r[3] > 1 || r[4] > 1 || r[5] > 1) bytes = true;
  if (bytes)
    for (auto& r : rows)
      for (int k = 3; k < 6; ++k) r[k] /= 255.0;
  return rows;
}

inline ParamVec initial_params(const Vec3<double>& mean, double scale, const Vec3<double>& color, double opacity) {
  Gaussian<double> g;
  g.mean = mean;
  g.scale = {scale, scale, scale};
  g.opacity = opacity;
  g.color = color;
  return to_params(g);
}

inline Vec3<double> uniform_in(const std::array<double, 6>& b, std::mt19937_64& rng) {
  Vec3<double> p;
  for (int k = 0; k < 3; ++k) p[k] = std::uniform_real_distribution<double>(b[k], b[k + 3])(rng);
  return p;
}

}  // namespace detail

// Genesis model: every slice starts on [0, swin_size).
inline SliceState init_state(const TrainConfig& cfg, const std::array<double, 6>& bounds) {
  cfg.validate();
  SliceState st;
  st.swin_size = cfg.swin_size;
  st.num_gs = cfg.num_gs;
  st.bounds = bounds;
  st.rng.seed(cfg.rng_seed);
  const double dx = bounds[3] - bounds[0], dy = bounds[4] - bounds[1], dz = bounds[5] - bounds[2];
  st.spatial_scale = cfg.spatial_scale > 0 ? cfg.spatial_scale : 0.5 * std::sqrt(dx * dx + dy * dy + dz * dz);

  std::vector<Vec3<double>> pts;
  std::vector<Vec3<double>> colors;
  if (!cfg.init_points.empty()) {
    auto rows = detail::read_points(cfg.init_points);
    std::shuffle(rows.begin(), rows.end(), st.rng);
    for (std::size_t i = 0; i < rows.size() && pts.size() < cfg.num_gs; ++i) {
      pts.push_back({rows[i][0], rows[i][1], rows[i][2]});
      colors.push_back({rows[i][3], rows[i][4], rows[i][5]});
    }
  }
  while (pts.size() < cfg.num_gs) {
    pts.push_back(detail::uniform_in(bounds, st.rng));
    colors.push_back({0.5, 0.5, 0.5});
  }
  const auto scales = detail::neighbour_scales(pts);

  const std::uint32_t per = st.slice_size();
  for (std::uint32_t s = 0; s < cfg.swin_size; ++s) {
    OptimizableSlice slice;
    slice.index = s;
    slice.life = {0, 0, cfg.swin_size};
    for (std::uint32_t j = 0; j < per; ++j) {
      const std::size_t i = static_cast<std::size_t>(s) * per + j;
      slice.params.push_back(detail::initial_params(pts[i], scales[i], colors[i], cfg.init_opacity));
    }
    slice.adam.assign(per, AdamState{});
    st.slices.push_back(std::move(slice));
  }
  return st;
}

// Staggers genesis lifespans to [0, i+1) so that exactly one slice matures per frame.
inline void schedule_expire(SliceState& st) {
  if (st.expire_scheduled) throw StateError("schedule_expire called twice");
  for (auto& s : st.slices) s.life = {0, 0, s.index + 1};
  st.expire_scheduled = true;
}

using MatureSink = std::function<void(FrameIndex st, std::span<const MaturedGeneration> generations)>;

// Freezes every optimizable generation with start < st, emits it, archives it
// and reborn its slot on [old expire, old expire + swin_size).
inline std::vector<MaturedGeneration> mature(FrameIndex st, SliceState& state, const TrainConfig& cfg,
                                             const MatureSink& sink) {
  if (st < 1) throw InvalidParameter("mature: st must be at least 1");
  std::vector<std::size_t> due;
  for (std::size_t i = 0; i < state.slices.size(); ++i)
    if (state.slices[i].life.start < st) due.push_back(i);
  std::sort(due.begin(), due.end(), [&](std::size_t a, std::size_t b) {
    const auto& la = state.slices[a].life;
    const auto& lb = state.slices[b].life;
    if (la.birth != lb.birth) return la.birth < lb.birth;
    if (la.expire != lb.expire) return la.expire < lb.expire;
    return state.slices[a].index < state.slices[b].index;
  });
  std::vector<MaturedGeneration> frozen;
  for (std::size_t i : due) frozen.push_back({state.slices[i].index, state.slices[i].life, state.slices[i].gaussians()});
  if (sink) sink(st, frozen);

  for (const auto& g : frozen) state.matured.push_back(g);
  while (state.matured_records() > state.num_gs) state.matured.pop_front();

  for (std::size_t i : due) {
    auto& s = state.slices[i];
    const FrameIndex expire = s.life.expire;
    s.life = {expire, expire, expire + state.swin_size};
    s.windows_trained = 0;
    for (auto& a : s.adam) a.reset();
    if (cfg.random_reinit) {
      std::vector<Vec3<double>> pts;
      for (std::size_t j = 0; j < s.params.size(); ++j) pts.push_back(detail::uniform_in(state.bounds, state.rng));
      const auto scales = detail::neighbour_scales(pts);
      for (std::size_t j = 0; j < s.params.size(); ++j)
        s.params[j] = detail::initial_params(pts[j], scales[j], {0.5, 0.5, 0.5}, cfg.init_opacity);
    }
  }
  return frozen;
}

// Gaussians that render frame f: active optimizable ones first (slice order),
// then active matured ones (archive order).
struct FrameSet {
  std::vector<Gaussian<double>> gaussians;
  std::vector<std::uint8_t> trainable;
  std::vector<std::pair<std::size_t, std::size_t>> owner;  // (slice, index) for trainable entries
};

inline FrameSet frame_set(const SliceState& state, FrameIndex f) {
  FrameSet fs;
  for (std::size_t s = 0; s < state.slices.size(); ++s) {
    const auto& slice = state.slices[s];
    if (!is_active(slice.life, f)) continue;
    for (std::size_t j = 0; j < slice.params.size(); ++j) {
      fs.gaussians.push_back(from_params(slice.params[j]));
      fs.trainable.push_back(1);
      fs.owner.emplace_back(s, j);
    }
  }
  for (const auto& g : state.matured) {
    if (!is_active(g.life, f)) continue;
    fs.gaussians.insert(fs.gaussians.end(), g.gaussians.begin(), g.gaussians.end());
    fs.trainable.insert(fs.trainable.end(), g.gaussians.size(), 0);
  }
  return fs;
}

struct WindowStats {
  std::uint32_t iterations = 0;
  double mean_loss = 0;
  std::size_t relocated = 0;
};

inline std::vector<std::uint32_t> training_views(const TrainConfig& cfg, std::uint32_t view_count) {
  std::vector<std::uint32_t> views;
  for (std::uint32_t v = 0; v < view_count; ++v)
    if (std::find(cfg.holdout_views.begin(), cfg.holdout_views.end(), v) == cfg.holdout_views.end())
      views.push_back(v);
  if (views.empty()) throw InvalidParameter("every view is held out; nothing to train on");
  return views;
}

// Inner loop over frames [st, min(ed, total_frames)).
inline WindowStats train_swin(FrameIndex st, FrameIndex ed, SliceState& state, const TrainConfig& cfg,
                              FrameDataset& data) {
  if (ed < st || ed - st > state.swin_size) throw InvalidParameter("train_swin: window wider than swin_size");
  const FrameIndex end = std::min<FrameIndex>(ed, data.total_frames());
  WindowStats stats;
  const std::uint32_t iterations = st == 0 ? cfg.genesis_iterations : cfg.window_iterations;
  if (iterations == 0 || end <= st) return stats;
  const auto views = training_views(cfg, data.view_count());
  std::uniform_int_distribution<FrameIndex> pick_frame(st, end - 1);
  std::uniform_int_distribution<std::size_t> pick_view(0, views.size() - 1);
  const LossWeights weights{cfg.ssim_weight, cfg.opacity_reg, cfg.scale_reg};
  const double mean_lr0 = cfg.lr.mean * state.spatial_scale;
  const double log_floor = std::log(kScaleFloor);

  for (std::uint32_t iter = 0; iter < iterations; ++iter) {
    const FrameIndex f = pick_frame(state.rng);
    const std::uint32_t view = views[pick_view(state.rng)];
    const double progress = iterations > 1 ? static_cast<double>(iter) / (iterations - 1) : 0.0;
    const double mean_lr = mean_lr0 * std::pow(cfg.mean_lr_final_ratio, progress);

    FrameSet fs = frame_set(state, f);
    const auto& cam = data.camera(view);
    FrameDataset::ImagePtr gt;
    try {
      gt = data.load_frame(f, view);
    } catch (const Error& e) {
      throw IoError("train_swin: frame " + std::to_string(f) + " view " + std::to_string(view) + ": " + e.what());
    }
    RasterState<double> rs;
    const auto pred = render(cam, std::span<const Gaussian<double>>(fs.gaussians), &rs);
    const std::size_t n_opt = fs.owner.size();
    const auto l = loss(pred, *gt, std::span<const Gaussian<double>>(fs.gaussians.data(), n_opt), weights);
    stats.mean_loss += l.value;
    const auto grads =
        render_backward(rs, cam, std::span<const Gaussian<double>>(fs.gaussians), l.grad_image, fs.trainable);

    std::vector<ActiveRef> active;
    active.reserve(n_opt);
    ParamVec rates{};
    for (std::size_t k = 0; k < kParamCount; ++k) rates[k] = cfg.lr.of(param_group(k));
    rates[0] = rates[1] = rates[2] = mean_lr;
    for (std::size_t i = 0; i < n_opt; ++i) {
      auto& slice = state.slices[fs.owner[i].first];
      const std::size_t j = fs.owner[i].second;
      ParamVec g = flatten(grads[i]);
      for (std::size_t k = 0; k < kParamCount; ++k) g[k] += l.reg_grads[i][k];
      if (cfg.gradient_scaling) {
        const double scale = gradient_scale(slice.windows_trained, cfg.gradient_scale_decay);
        for (int k = 0; k < 3; ++k) g[k] *= scale;
      }
      ParamVec& p = slice.params[j];
      adam_step(p, slice.adam[j], g, rates);
      const Quat<double> q = Quat<double>{p[6], p[7], p[8], p[9]}.normalized();
      p[6] = q.w;
      p[7] = q.x;
      p[8] = q.y;
      p[9] = q.z;
      for (int k = 3; k < 6; ++k) p[k] = std::max(p[k], log_floor);
      for (int k = 11; k < 14; ++k) p[k] = std::clamp(p[k], 0.0, 1.0);
      active.push_back({&p, &slice.adam[j]});
    }
    sgld_perturb(active, mean_lr, cfg.noise_lr, cfg.noise_gate_sharpness, cfg.noise_gate_center, state.rng);
    if (iter % cfg.relocate_period == 0)
      stats.relocated += relocate(active, cfg.dead_opacity_threshold, state.rng).dead;
    ++stats.iterations;
  }
  for (auto& s : state.slices) ++s.windows_trained;
  stats.mean_loss /= stats.iterations;
  return stats;
}

struct TrainHooks {
  // After each mature(st), with the bytes just written for that call.
  std::function<void(FrameIndex st, const SliceState&, std::span<const std::vector<std::uint8_t>>)> after_mature;
  std::function<void(FrameIndex st, const WindowStats&)> after_window;
  std::ostream* log = nullptr;
};

struct TrainSummary {
  std::uint32_t frames = 0;
  std::uint64_t records_written = 0;
  std::uint64_t bytes_written = 0;
  SliceState final_state;
};

inline Manifest make_manifest(const TrainConfig& cfg, const DatasetInfo& info) {
  Manifest m;
  m.num_gs = cfg.num_gs;
  m.swin_size = cfg.swin_size;
  m.fps = static_cast<float>(cfg.fps);
  m.total_frames = info.total_frames;
  m.profile = cfg.profile;
  for (int k = 0; k < 6; ++k) m.bounds[k] = static_cast<float>(info.bounds[k]);
  m.camera_count = static_cast<std::uint32_t>(info.cameras.size());
  return m;
}

// Genesis, schedule_expire, then mature/train per frame and a final mature.
// The container is marked partial if anything throws.
inline TrainSummary train_video(FrameDataset& data, const TrainConfig& cfg, const std::filesystem::path& out,
                                const TrainHooks& hooks = {}) {
  cfg.validate();
  for (auto v : cfg.holdout_views)
    if (v >= data.view_count()) throw InvalidParameter("holdout view " + std::to_string(v) + " does not exist");
  const std::uint32_t total = data.total_frames();
  TrainSummary summary;
  ContainerWriter writer(out, make_manifest(cfg, data.info()));
  SliceState state = init_state(cfg, data.info().bounds);

  std::vector<std::vector<std::uint8_t>> emitted;
  MatureSink sink = [&](FrameIndex st, std::span<const MaturedGeneration> gens) {
    emitted.clear();
    for (const auto& g : gens) emitted.push_back(encode_generation(g, cfg.swin_size, cfg.profile));
    if (st == 1) {
      writer.write_init(emitted);
    } else {
      if (emitted.size() != 1)
        throw ConsistencyError("mature(" + std::to_string(st) + ") produced " + std::to_string(emitted.size()) +
                               " slices");
      writer.write_frame(emitted.front());
    }
    for (const auto& b : emitted) summary.bytes_written += b.size();
    for (const auto& g : gens) summary.records_written += g.gaussians.size();
  };
  auto log = [&](const std::string& msg) {
    if (hooks.log) *hooks.log << msg << std::endl;
  };

  auto window = [&](FrameIndex st) {
    const auto ws = train_swin(st, st + cfg.swin_size, state, cfg, data);
    log("window " + std::to_string(st) + ": " + std::to_string(ws.iterations) + " iterations, mean loss " +
        std::to_string(ws.mean_loss) + ", relocated " + std::to_string(ws.relocated));
    if (hooks.after_window) hooks.after_window(st, ws);
  };
  auto do_mature = [&](FrameIndex st) {
    mature(st, state, cfg, sink);
    if (hooks.after_mature) hooks.after_mature(st, state, emitted);
  };

  window(0);
  schedule_expire(state);
  for (FrameIndex st = 1; st < total; ++st) {
    do_mature(st);
    window(st);
  }
  do_mature(total);
  writer.finish();
  summary.frames = total;
  summary.final_state = std::move(state);
  return summary;
}

}  // namespace swings
