#pragma once

#include <filesystem>

#include "swings/train/synth.hpp"
#include "swings/train/trainer.hpp"

namespace swings::oracle {

struct ToyContainerOptions {
  std::uint32_t frames = 10;
  std::uint32_t num_gs = 60;
  std::uint32_t swin_size = 3;
  Profile profile = Profile::kQuantized;
  std::uint32_t genesis_iterations = 60;
  std::uint32_t window_iterations = 10;
};

// Trains a small container on a synthetic scene. Fast, not converged.
inline TrainSummary make_toy_container(const std::filesystem::path& dir, const ToyContainerOptions& o = {},
                                       const TrainHooks& hooks = {}) {
  SynthOptions s;
  s.seed = 21;
  s.total_frames = o.frames;
  s.n_views = 2;
  s.n_gaussians = 50;
  s.width = 32;
  s.height = 32;
  s.focal = 34;
  synth_scene(s, dir / "data");
  FrameDataset data(dir / "data", 8);
  TrainConfig c;
  c.num_gs = o.num_gs;
  c.swin_size = o.swin_size;
  c.genesis_iterations = o.genesis_iterations;
  c.window_iterations = o.window_iterations;
  c.relocate_period = 10;
  c.rng_seed = 3;
  c.profile = o.profile;
  return train_video(data, c, dir / "toy.swgs", hooks);
}

}  // namespace swings::oracle
