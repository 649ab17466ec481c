#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "swings/codec/container.hpp"
#include "swings/raster/rasterizer.hpp"

namespace swings {

// Every generation in a container, held at once. This is the offline
// reference a player must agree with: the Gaussians of frame f are the real
// records of every generation whose lifespan covers f, in slot order.
class Archive {
 public:
  explicit Archive(const ContainerReader& reader) : manifest_(reader.manifest()) {
    generations_ = reader.read_init();
    for (FrameIndex f = 1; f <= reader.frame_count(); ++f) generations_.push_back(reader.read_frame(f));
  }

  const Manifest& manifest() const { return manifest_; }
  const std::vector<DecodedSlice>& generations() const { return generations_; }

  std::vector<const DecodedSlice*> active_generations(FrameIndex f) const {
    std::vector<const DecodedSlice*> out;
    for (const auto& g : generations_)
      if (is_active(g.lifespan, f)) out.push_back(&g);
    std::stable_sort(out.begin(), out.end(), [](const DecodedSlice* a, const DecodedSlice* b) {
      return a->header.slice_index < b->header.slice_index;
    });
    return out;
  }

  std::vector<Gaussian<float>> active(FrameIndex f) const {
    std::vector<Gaussian<float>> out;
    for (const auto* g : active_generations(f))
      out.insert(out.end(), g->records.begin(), g->records.begin() + static_cast<std::ptrdiff_t>(g->kept()));
    return out;
  }

  Image<float> render(FrameIndex f, const Camera<float>& cam) const {
    const auto gs = active(f);
    return swings::render(cam, std::span<const Gaussian<float>>(gs));
  }

 private:
  Manifest manifest_;
  std::vector<DecodedSlice> generations_;
};

}  // namespace swings
