#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <set>

#include "support/oracles.hpp"
#include "support/tempdir.hpp"
#include "swings/train/synth.hpp"
#include "swings/train/trainer.hpp"

using namespace swings;
namespace fs = std::filesystem;

namespace {

SynthOptions tiny_scene(std::uint32_t frames) {
  SynthOptions o;
  o.seed = 3;
  o.total_frames = frames;
  o.n_views = 2;
  o.n_gaussians = 40;
  o.width = 24;
  o.height = 24;
  o.focal = 26;
  return o;
}

TrainConfig tiny_config(std::uint32_t num_gs, std::uint32_t swin) {
  TrainConfig c;
  c.num_gs = num_gs;
  c.swin_size = swin;
  c.genesis_iterations = 20;
  c.window_iterations = 4;
  c.relocate_period = 3;
  c.rng_seed = 5;
  c.max_cached_frames = 8;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<ActiveRef> refs(std::vector<ParamVec>& p, std::vector<AdamState>& a) {
  std::vector<ActiveRef> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back({&p[i], &a[i]});
  return out;
}

ParamVec params_with_opacity(double o, Vec3<double> mean = {0, 0, 0}) {
  Gaussian<double> g;
  g.mean = mean;
  g.scale = {0.1, 0.2, 0.3};
  g.rotation = Quat<double>{1, 0.2, -0.3, 0.1}.normalized();
  g.opacity = o;
  g.color = {0.2, 0.4, 0.6};
  return to_params(g);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

TEST(TrainConfig, DefaultsMatchDocumentedValues) {
  const TrainConfig c;
  EXPECT_EQ(c.genesis_iterations, 30000u);
  EXPECT_EQ(c.window_iterations, 2000u);
  EXPECT_EQ(c.relocate_period, 100u);
  EXPECT_EQ(c.noise_lr, 5e4);
  EXPECT_EQ(c.scale_reg, 1e-2);
  EXPECT_EQ(c.opacity_reg, 2e-2);
  EXPECT_EQ(c.ssim_weight, 0.2);
  EXPECT_EQ(c.gradient_scale_decay, 0.5);
  EXPECT_EQ(c.dead_opacity_threshold, 0.005);
  EXPECT_EQ(c.lr.mean, 1.6e-4);
  EXPECT_EQ(c.lr.rotation, 1e-3);
  EXPECT_EQ(c.lr.log_scale, 5e-3);
  EXPECT_EQ(c.lr.opacity, 5e-2);
  EXPECT_EQ(c.lr.color, 2.5e-3);
}

TEST(TrainConfig, JsonRoundTripAndErrors) {
  TrainConfig c = tiny_config(30, 3);
  c.holdout_views = {0, 2};
  c.profile = Profile::kFull;
  const auto back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_THROW(TrainConfig::from_json({{"swin_sise", 5}}), InvalidParameter);
  EXPECT_THROW(TrainConfig::from_json({{"swin_size", "five"}}), InvalidParameter);
  EXPECT_THROW(TrainConfig::from_json({{"num_gs", 501}}), InvalidParameter);
  EXPECT_THROW(TrainConfig::from_json({{"dead_opacity_threshold", 1.5}}), InvalidParameter);
  EXPECT_THROW(TrainConfig::from_json({{"relocate_period", 0}}), InvalidParameter);
}

TEST(TrainConfig, LoadsFromFile) {
  oracle::TempDir dir;
  std::ofstream(dir / "c.json") << R"({"num_gs": 40, "swin_size": 4, "noise_lr": 0})";
  const auto c = TrainConfig::load(dir / "c.json");
  EXPECT_EQ(c.num_gs, 40u);
  EXPECT_EQ(c.noise_lr, 0.0);
  EXPECT_THROW(TrainConfig::load(dir / "none.json"), IoError);
  std::ofstream(dir / "bad.json") << "{";
  EXPECT_THROW(TrainConfig::load(dir / "bad.json"), InvalidParameter);
}

// ---------------------------------------------------------------------------
// SGLD noise

TEST(Sgld, OpaqueGaussiansBarelyMove) {
  std::vector<ParamVec> p{params_with_opacity(1.0 - 1e-9)};
  std::vector<AdamState> a(1);
  const ParamVec before = p[0];
  std::mt19937_64 rng(1);
  const double mean_lr = 1e-3, noise_lr = 5e4;
  sgld_perturb(refs(p, a), mean_lr, noise_lr, 100, 0.005, rng);
  const double step = noise_lr * mean_lr;
  for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(p[0][k] - before[k]), 1e-12 * step);
  for (std::size_t k = 3; k < kParamCount; ++k) EXPECT_EQ(p[0][k], before[k]);
}

TEST(Sgld, ZeroNoiseRateIsNoop) {
  std::vector<ParamVec> p{params_with_opacity(0.001)};
  std::vector<AdamState> a(1);
  const ParamVec before = p[0];
  std::mt19937_64 rng(1);
  sgld_perturb(refs(p, a), 1e-3, 0.0, 100, 0.005, rng);
  EXPECT_EQ(p[0], before);
}

TEST(Sgld, PerturbationCovarianceIsProportionalToSigma) {
  const ParamVec base = params_with_opacity(0.001);
  const Gaussian<double> g = from_params(base);
  std::mt19937_64 rng(2);
  const int draws = 10000;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  std::vector<Eigen::Vector3d> samples;
  for (int i = 0; i < draws; ++i) {
    std::vector<ParamVec> p{base};
    std::vector<AdamState> a(1);
    sgld_perturb(refs(p, a), 1e-3, 5e4, 100, 0.005, rng);
    samples.emplace_back(p[0][0] - base[0], p[0][1] - base[1], p[0][2] - base[2]);
    mean += samples.back();
  }
  mean /= draws;
  for (const auto& s : samples) cov += (s - mean) * (s - mean).transpose();
  cov /= draws - 1;
  const double amount = 5e4 * 1e-3 * sigmoid(-100 * (g.opacity - 0.005));
  const Eigen::Matrix3d expected = amount * amount * oracle::eigen_covariance(g);
  EXPECT_LT((cov - expected).norm() / expected.norm(), 0.1);
}

// ---------------------------------------------------------------------------
// Relocation

TEST(Relocate, NothingDeadLeavesStateUnchanged) {
  std::vector<ParamVec> p{params_with_opacity(0.3), params_with_opacity(0.9)};
  std::vector<AdamState> a(2);
  a[0].step = 7;
  const auto before = p;
  std::mt19937_64 rng(1);
  const auto stats = relocate(refs(p, a), 0.005, rng);
  EXPECT_EQ(stats.dead, 0u);
  EXPECT_EQ(p, before);
  EXPECT_EQ(a[0].step, 7u);
}

TEST(Relocate, OneCloneOnTargetPreservesStackedTransmittance) {
  std::vector<ParamVec> p{params_with_opacity(0.9, {1, 2, 3}), params_with_opacity(0.001, {-5, 0, 0})};
  std::vector<AdamState> a(2);
  a[0].step = a[1].step = 9;
  std::mt19937_64 rng(1);
  const auto stats = relocate(refs(p, a), 0.005, rng);
  EXPECT_EQ(stats.dead, 1u);
  EXPECT_EQ(stats.targets, 1u);
  const double expected = 1 - std::sqrt(0.1);
  EXPECT_NEAR(expected, 0.68377, 1e-5);
  EXPECT_NEAR(sigmoid(p[0][10]), expected, 1e-12);
  EXPECT_NEAR(sigmoid(p[1][10]), expected, 1e-12);
  EXPECT_NEAR((1 - sigmoid(p[0][10])) * (1 - sigmoid(p[1][10])), 0.1, 1e-12);
  for (int k : {0, 1, 2, 6, 7, 8, 9, 11, 12, 13}) EXPECT_EQ(p[1][k], p[0][k]) << k;
  const ParamVec orig = params_with_opacity(0.9, {1, 2, 3});
  for (int k = 3; k < 6; ++k) {
    EXPECT_EQ(p[0][k], orig[k]);
    EXPECT_NEAR(std::exp(p[1][k]), std::exp(orig[k]) / std::sqrt(2.0), 1e-12);
  }
  EXPECT_EQ(a[0].step, 0u);
  EXPECT_EQ(a[1].step, 0u);
}

TEST(Relocate, OpacityFormulaForManyClones) {
  for (std::size_t n : {1u, 2u, 3u, 7u})
    for (double o : {0.05, 0.5, 0.93}) {
      const double o2 = relocated_opacity(o, n);
      EXPECT_NEAR(std::pow(1 - o2, static_cast<double>(n + 1)), 1 - o, 1e-12);
    }
}

TEST(Relocate, ConservesCountAndOnlyMovesDead) {
  std::mt19937_64 init(4);
  std::uniform_real_distribution<double> op(0.0, 0.02), pos(-1, 1);
  std::vector<ParamVec> p;
  for (int i = 0; i < 200; ++i) p.push_back(params_with_opacity(op(init), {pos(init), pos(init), pos(init)}));
  std::vector<AdamState> a(p.size());
  const auto before = p;
  std::mt19937_64 rng(1);
  const auto stats = relocate(refs(p, a), 0.005, rng);
  EXPECT_EQ(p.size(), 200u);
  std::size_t dead = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (sigmoid(before[i][10]) < 0.005) {
      ++dead;
      // A relocated Gaussian sits on the mean of some originally alive one.
      bool on_alive = false;
      for (std::size_t j = 0; j < p.size(); ++j)
        if (sigmoid(before[j][10]) >= 0.005 && before[j][0] == p[i][0] && before[j][1] == p[i][1]) on_alive = true;
      EXPECT_TRUE(on_alive) << i;
    } else {
      for (int k : {0, 1, 2, 3, 4, 5}) EXPECT_EQ(p[i][k], before[i][k]);
    }
  }
  EXPECT_EQ(stats.dead, dead);
  EXPECT_GT(dead, 0u);
}

TEST(Relocate, NoAliveIsFlaggedNoop) {
  std::vector<ParamVec> p{params_with_opacity(0.001), params_with_opacity(0.002)};
  std::vector<AdamState> a(2);
  const auto before = p;
  std::mt19937_64 rng(1);
  EXPECT_TRUE(relocate(refs(p, a), 0.005, rng).no_alive);
  EXPECT_EQ(p, before);
}

TEST(Relocate, RenderDropStaysWithinOneDecibel) {
  for (std::uint64_t seed : {8u, 9u, 10u}) {
    std::mt19937_64 rng(seed);
    const auto cam = oracle::test_camera(64, 64, 70);
    const auto toy = oracle::relocation_toy(rng);
    const auto gt = render(cam, std::span<const Gaussian<double>>(toy.truth));
    std::vector<ParamVec> p;
    for (const auto& g : toy.model) p.push_back(to_params(g));
    std::vector<AdamState> a(p.size());
    const double before = psnr(render(cam, std::span<const Gaussian<double>>(toy.model)), gt);
    EXPECT_EQ(relocate(refs(p, a), 0.005, rng).dead, 20u);
    std::vector<Gaussian<double>> after_gs;
    for (const auto& q : p) after_gs.push_back(from_params(q));
    const double after = psnr(render(cam, std::span<const Gaussian<double>>(after_gs)), gt);
    EXPECT_EQ(after_gs.size(), toy.model.size());
    EXPECT_LE(before - after, 1.0) << "seed " << seed << " before " << before << " after " << after;
  }
}

// ---------------------------------------------------------------------------
// Gradient scaling

TEST(GradientScale, Values) {
  EXPECT_EQ(gradient_scale(0, 0.5), 1.0);
  EXPECT_EQ(gradient_scale(2, 0.5), 0.25);
  EXPECT_DOUBLE_EQ(gradient_scale(3, 0.8), 0.512);
}

TEST(GradientScale, PairedRunScalesOnlyMeanGradients) {
  oracle::TempDir dir;
  synth_scene(tiny_scene(4), dir.path());
  FrameDataset data(dir.path(), 8);
  TrainConfig cfg = tiny_config(20, 2);
  cfg.window_iterations = 1;
  auto run = [&](bool scaling) {
    TrainConfig c = cfg;
    c.gradient_scaling = scaling;
    SliceState st = init_state(c, data.info().bounds);
    for (auto& s : st.slices) s.windows_trained = 2;
    for (auto& s : st.slices) s.life = {1, 1, 3};
    train_swin(1, 3, st, c, data);
    return st;
  };
  const auto scaled = run(true);
  const auto control = run(false);
  bool any = false;
  for (std::size_t s = 0; s < scaled.slices.size(); ++s)
    for (std::size_t j = 0; j < scaled.slices[s].adam.size(); ++j) {
      const auto& m1 = scaled.slices[s].adam[j].m;
      const auto& m0 = control.slices[s].adam[j].m;
      for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(m1[k], 0.25 * m0[k], 1e-15 + 1e-12 * std::abs(m0[k]));
        any = any || m0[k] != 0;
      }
      for (std::size_t k = 3; k < kParamCount; ++k) EXPECT_EQ(m1[k], m0[k]);
    }
  EXPECT_TRUE(any);
}

// ---------------------------------------------------------------------------
// Schedule

TEST(Schedule, StaggeredGenesisExpires) {
  TrainConfig c = tiny_config(50, 5);
  SliceState st = init_state(c, {-1, -1, -1, 1, 1, 1});
  schedule_expire(st);
  for (std::uint32_t i = 0; i < 5; ++i) EXPECT_EQ(st.slices[i].life, (Lifespan{0, 0, i + 1}));
  EXPECT_THROW(schedule_expire(st), StateError);

  TrainConfig one = tiny_config(10, 1);
  SliceState s1 = init_state(one, {-1, -1, -1, 1, 1, 1});
  schedule_expire(s1);
  EXPECT_EQ(s1.slices[0].life, (Lifespan{0, 0, 1}));
}

TEST(Schedule, ActiveSetPartitionsAfterRebirth) {
  TrainConfig c = tiny_config(50, 5);
  SliceState st = init_state(c, {-1, -1, -1, 1, 1, 1});
  schedule_expire(st);
  const auto init = mature(1, st, c, {});
  EXPECT_EQ(init.size(), 5u);
  for (FrameIndex f = 1; f < 6; ++f) EXPECT_EQ(frame_set(st, f).gaussians.size(), 50u) << f;
}

TEST(Schedule, MatureArchivesInitThenOneSlicePerFrame) {
  TrainConfig c = tiny_config(50, 5);
  SliceState st = init_state(c, {-1, -1, -1, 1, 1, 1});
  schedule_expire(st);
  std::size_t written = 0;
  MatureSink sink = [&](FrameIndex, std::span<const MaturedGeneration> g) {
    written = 0;
    for (const auto& x : g) written += x.gaussians.size();
  };
  mature(1, st, c, sink);
  EXPECT_EQ(written, 50u);
  for (FrameIndex s = 2; s < 15; ++s) {
    const auto frozen = mature(s, st, c, sink);
    EXPECT_EQ(written, 10u) << s;
    ASSERT_EQ(frozen.size(), 1u);
    EXPECT_EQ(frozen[0].life.birth, s - 1);
    EXPECT_LE(st.matured_records(), 50u);
    for (const auto& sl : st.slices) {
      EXPECT_EQ(sl.life.expire - sl.life.start, 5u);
      EXPECT_EQ(sl.life.birth, sl.life.start);
    }
    for (FrameIndex f = s; f < s + 5; ++f) EXPECT_EQ(frame_set(st, f).gaussians.size(), 50u);
  }
}

TEST(Schedule, RebornLifespanArithmetic) {
  TrainConfig c = tiny_config(10, 5);
  SliceState st = init_state(c, {-1, -1, -1, 1, 1, 1});
  for (auto& s : st.slices) s.life = {1, 1, 6};
  st.slices[0].life = {1, 1, 6};
  st.expire_scheduled = true;
  mature(7, st, c, {});
  EXPECT_EQ(st.slices[0].life, (Lifespan{6, 6, 11}));
  EXPECT_EQ(st.slices[0].windows_trained, 0u);
}

TEST(Schedule, WarmStartKeepsParametersRandomReinitReplacesThem) {
  TrainConfig c = tiny_config(10, 5);
  SliceState warm = init_state(c, {-1, -1, -1, 1, 1, 1});
  schedule_expire(warm);
  const auto before = warm.slices[0].params;
  mature(1, warm, c, {});
  EXPECT_EQ(warm.slices[0].params, before);
  c.random_reinit = true;
  SliceState fresh = init_state(c, {-1, -1, -1, 1, 1, 1});
  schedule_expire(fresh);
  mature(1, fresh, c, {});
  EXPECT_NE(fresh.slices[0].params, before);
}

// ---------------------------------------------------------------------------
// train_swin

TEST(TrainSwin, ZeroIterationsLeavesStateUnchanged) {
  oracle::TempDir dir;
  synth_scene(tiny_scene(3), dir.path());
  FrameDataset data(dir.path(), 4);
  TrainConfig c = tiny_config(20, 2);
  SliceState st = init_state(c, data.info().bounds);
  const auto before = st.slices[0].params;
  c.genesis_iterations = 0;
  const auto stats = train_swin(0, 2, st, c, data);
  EXPECT_EQ(stats.iterations, 0u);
  EXPECT_EQ(st.slices[0].params, before);
  EXPECT_EQ(st.slices[0].windows_trained, 0u);
}

TEST(TrainSwin, EarlierFramesAreFrozen) {
  oracle::TempDir dir;
  synth_scene(tiny_scene(8), dir.path());
  FrameDataset data(dir.path(), 8);
  TrainConfig c = tiny_config(30, 3);
  SliceState st = init_state(c, data.info().bounds);
  train_swin(0, 3, st, c, data);
  schedule_expire(st);
  for (FrameIndex s = 1; s < 4; ++s) {
    mature(s, st, c, {});
    train_swin(s, s + 3, st, c, data);
  }
  mature(4, st, c, {});
  const auto& cam = data.camera(0);
  auto snap = [&](FrameIndex f) {
    auto fs = frame_set(st, f);
    return render(cam, std::span<const Gaussian<double>>(fs.gaussians));
  };
  const auto before = snap(3);
  train_swin(4, 7, st, c, data);
  EXPECT_EQ(snap(3), before);
}

TEST(TrainSwin, GenesisFitsSingleFrameScene) {
  oracle::TempDir dir;
  SynthOptions o;
  o.seed = 12;
  o.total_frames = 1;
  o.n_views = 3;
  o.n_gaussians = 200;
  o.width = o.height = 64;
  synth_scene(o, dir.path());
  FrameDataset data(dir.path(), 8);
  TrainConfig c;
  c.swin_size = 1;
  c.num_gs = 500;
  c.genesis_iterations = 1500;
  c.rng_seed = 2;
  SliceState st = init_state(c, data.info().bounds);
  train_swin(0, 1, st, c, data);
  double total = 0;
  for (std::uint32_t v = 0; v < 3; ++v) {
    auto fs = frame_set(st, 0);
    total += psnr(render(data.camera(v), std::span<const Gaussian<double>>(fs.gaussians)), *data.load_frame(0, v));
  }
  EXPECT_GE(total / 3, 30.0);
}

TEST(TrainSwin, MissingImageReportsFrameAndView) {
  oracle::TempDir dir;
  synth_scene(tiny_scene(2), dir.path());
  FrameDataset data(dir.path(), 4);
  fs::remove(frame_image_path(dir.path(), 1, 0));
  fs::remove(frame_image_path(dir.path(), 1, 1));
  TrainConfig c = tiny_config(20, 2);
  SliceState st = init_state(c, data.info().bounds);
  try {
    train_swin(0, 2, st, c, data);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos) << e.what();
  }
}

// ---------------------------------------------------------------------------
// train_video

TEST(TrainVideo, SingleFrameIsManifestAndInit) {
  oracle::TempDir dir;
  synth_scene(tiny_scene(1), dir / "data");
  FrameDataset data(dir / "data", 4);
  const auto sum = train_video(data, tiny_config(20, 4), dir / "out.swgs");
  EXPECT_EQ(sum.records_written, 20u);
  ContainerReader r(dir / "out.swgs");
  EXPECT_TRUE(r.complete());
  EXPECT_EQ(r.frame_count(), 0u);
  EXPECT_EQ(r.read_init().size(), 4u);
}

TEST(TrainVideo, RecordCountAndGenerationsAppearOnce) {
  oracle::TempDir dir;
  synth_scene(tiny_scene(10), dir / "data");
  FrameDataset data(dir / "data", 4);
  TrainConfig c = tiny_config(1000, 5);
  c.genesis_iterations = 2;
  c.window_iterations = 1;
  std::set<std::pair<std::uint32_t, FrameIndex>> seen;
  TrainHooks hooks;
  hooks.after_mature = [&](FrameIndex, const SliceState& st, std::span<const std::vector<std::uint8_t>> b) {
    for (const auto& bytes : b) {
      const auto s = unpack_slice(bytes, c.profile, 200, 5);
      EXPECT_TRUE(seen.insert({s.header.slice_index, s.header.target_frame}).second);
    }
    (void)st;
  };
  const auto sum = train_video(data, c, dir / "out.swgs", hooks);
  EXPECT_EQ(sum.records_written, 1000u + 9 * 200);
  ContainerReader r(dir / "out.swgs");
  EXPECT_EQ(r.frame_count(), 9u);
  for (FrameIndex f = 1; f < 10; ++f) {
    const auto s = r.read_frame(f);
    EXPECT_EQ(s.header.target_frame, f);
    EXPECT_EQ(s.header.slice_index, f % 5);
    EXPECT_EQ(r.frame_bytes(f).size(), 16u + 200 * 30);
  }
}

TEST(TrainVideo, ArchivedGenerationsNeverChange) {
  oracle::TempDir dir;
  synth_scene(tiny_scene(9), dir / "data");
  FrameDataset data(dir / "data", 4);
  TrainConfig c = tiny_config(30, 3);
  std::map<std::pair<std::uint32_t, FrameIndex>, std::vector<std::uint8_t>> streamed;
  TrainHooks hooks;
  std::size_t checks = 0;
  hooks.after_mature = [&](FrameIndex, const SliceState& st, std::span<const std::vector<std::uint8_t>> b) {
    for (const auto& bytes : b) {
      bytes::Reader r(bytes);
      const auto h = read_slice_header(r);
      streamed[{h.slice_index, h.target_frame}] = bytes;
    }
    for (const auto& g : st.matured) {
      const auto h = generation_header(g, 3);
      const auto key = std::make_pair(h.slice_index, h.target_frame);
      ASSERT_TRUE(streamed.count(key));
      EXPECT_EQ(encode_generation(g, 3, c.profile), streamed[key]);
      ++checks;
    }
  };
  train_video(data, c, dir / "out.swgs", hooks);
  EXPECT_GT(checks, 9u);
}

TEST(TrainVideo, CountConservedForEveryTrainedFrame) {
  oracle::TempDir dir;
  synth_scene(tiny_scene(8), dir / "data");
  FrameDataset data(dir / "data", 4);
  TrainConfig c = tiny_config(40, 4);
  TrainHooks hooks;
  hooks.after_mature = [&](FrameIndex st, const SliceState& s, std::span<const std::vector<std::uint8_t>>) {
    for (FrameIndex f = st; f < std::min<FrameIndex>(st + 4, 8); ++f)
      EXPECT_EQ(frame_set(s, f).gaussians.size(), 40u) << "st " << st << " frame " << f;
  };
  train_video(data, c, dir / "out.swgs", hooks);
}

TEST(TrainVideo, DeterministicAndCacheIndependent) {
  oracle::TempDir dir;
  synth_scene(tiny_scene(6), dir / "data");
  TrainConfig c = tiny_config(30, 3);
  FrameDataset a(dir / "data", 4), b(dir / "data", 1000);
  train_video(a, c, dir / "a.swgs");
  train_video(b, c, dir / "b.swgs");
  EXPECT_EQ(slurp(dir / "a.swgs"), slurp(dir / "b.swgs"));
  c.rng_seed = 6;
  FrameDataset d(dir / "data", 4);
  train_video(d, c, dir / "c.swgs");
  EXPECT_NE(slurp(dir / "a.swgs"), slurp(dir / "c.swgs"));
}

TEST(TrainVideo, SinkFailureLeavesPartialContainer) {
  oracle::TempDir dir;
  synth_scene(tiny_scene(6), dir / "data");
  FrameDataset data(dir / "data", 4);
  TrainHooks hooks;
  hooks.after_mature = [](FrameIndex st, const SliceState&, std::span<const std::vector<std::uint8_t>>) {
    if (st == 3) throw IoError("disk full");
  };
  EXPECT_THROW(train_video(data, tiny_config(30, 3), dir / "out.swgs", hooks), IoError);
  ContainerReader r(dir / "out.swgs");
  EXPECT_FALSE(r.complete());
  EXPECT_TRUE(r.has_init());
  EXPECT_EQ(r.frame_count(), 2u);
}

TEST(TrainVideo, PointFileInitialization) {
  oracle::TempDir dir;
  synth_scene(tiny_scene(1), dir / "data");
  std::ofstream(dir / "pts.txt") << "# x y z r g b\n0.1 0.2 0.3 255 0 0\n-0.1 0 0.2 0 255 0\n";
  TrainConfig c = tiny_config(20, 4);
  c.init_points = (dir / "pts.txt").string();
  const SliceState st = init_state(c, {-1, -1, -1, 1, 1, 1});
  std::size_t from_file = 0;
  for (const auto& s : st.slices)
    for (const auto& p : s.params)
      if ((p[11] == 1.0 && p[12] == 0.0) || (p[11] == 0.0 && p[12] == 1.0)) ++from_file;
  EXPECT_EQ(from_file, 2u);
  std::ofstream(dir / "bad.txt") << "1 2\n";
  c.init_points = (dir / "bad.txt").string();
  EXPECT_THROW(init_state(c, {-1, -1, -1, 1, 1, 1}), FormatError);
}
