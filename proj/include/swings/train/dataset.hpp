#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <list>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "swings/core/error.hpp"
#include "swings/core/gaussian.hpp"
#include "swings/raster/image.hpp"
#include "swings/raster/png_io.hpp"

namespace swings {

struct DatasetInfo {
  int width{};
  int height{};
  std::uint32_t total_frames{};
  std::vector<Camera<double>> cameras;
  std::array<double, 6> bounds{-1, -1, -1, 1, 1, 1};  // min xyz, max xyz
};

inline nlohmann::json camera_to_json(const Camera<double>& c) {
  std::vector<double> m(16, 0.0);
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) m[r * 4 + k] = c.rotation(r, k);
    m[r * 4 + 3] = c.translation[r];
  }
  m[15] = 1;
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"world_to_camera", m}};
}

inline Camera<double> camera_from_json(const nlohmann::json& j, int width, int height) {
  Camera<double> c;
  c.width = width;
  c.height = height;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  const auto m = j.at("world_to_camera").get<std::vector<double>>();
  if (m.size() != 16) throw FormatError("world_to_camera must have 16 entries");
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) c.rotation(r, k) = m[r * 4 + k];
    c.translation[r] = m[r * 4 + 3];
  }
  c.validate();
  return c;
}

inline std::filesystem::path frame_image_path(const std::filesystem::path& root, FrameIndex frame,
                                              std::uint32_t view) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "frames/%05u/cam%02u.png", frame, view);
  return root / buf;
}

inline void write_dataset_info(const std::filesystem::path& root, const DatasetInfo& info) {
  nlohmann::json views = nlohmann::json::array();
  for (const auto& c : info.cameras) views.push_back(camera_to_json(c));
  const nlohmann::json j{{"width", info.width},
                         {"height", info.height},
                         {"total_frames", info.total_frames},
                         {"bounds", info.bounds},
                         {"views", views}};
  std::ofstream out(root / "cameras.json");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (root / "cameras.json").string());
}

inline DatasetInfo read_dataset_info(const std::filesystem::path& root) {
  const auto path = root / "cameras.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    DatasetInfo info;
    info.width = j.at("width").get<int>();
    info.height = j.at("height").get<int>();
    info.total_frames = j.at("total_frames").get<std::uint32_t>();
    if (j.contains("bounds")) info.bounds = j.at("bounds").get<std::array<double, 6>>();
    for (const auto& v : j.at("views")) info.cameras.push_back(camera_from_json(v, info.width, info.height));
    if (info.cameras.empty()) throw FormatError("no views");
    if (info.total_frames == 0) throw FormatError("total_frames must be positive");
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// Lazily decoded frames with a least-recently-used cache of at most
// `max_cached` (frame, view) images.
class FrameDataset {
 public:
  using ImagePtr = std::shared_ptr<const Image<double>>;

  FrameDataset(std::filesystem::path root, std::size_t max_cached)
      : root_(std::move(root)), info_(read_dataset_info(root_)), capacity_(max_cached) {
    if (capacity_ == 0) throw InvalidParameter("dataset cache capacity must be positive");
  }

  const DatasetInfo& info() const { return info_; }
  const std::filesystem::path& root() const { return root_; }
  std::uint32_t total_frames() const { return info_.total_frames; }
  std::uint32_t view_count() const { return static_cast<std::uint32_t>(info_.cameras.size()); }
  const Camera<double>& camera(std::uint32_t view) const { return info_.cameras.at(view); }

  ImagePtr load_frame(FrameIndex frame, std::uint32_t view) {
    if (frame >= info_.total_frames || view >= view_count())
      throw InvalidParameter("load_frame: (frame " + std::to_string(frame) + ", view " + std::to_string(view) +
                             ") out of range");
    const Key key{frame, view};
    if (auto it = entries_.find(key); it != entries_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.first);
      ++hits_;
      return it->second.second;
    }
    ImagePtr img;
    const auto path = frame_image_path(root_, frame, view);
    try {
      img = std::make_shared<const Image<double>>(read_png<double>(path));
    } catch (const Error& e) {
      throw IoError("frame " + std::to_string(frame) + " view " + std::to_string(view) + ": " + e.what());
    }
    if (img->width != info_.width || img->height != info_.height)
      throw FormatError(path.string() + ": image size does not match cameras.json");
    ++decodes_;
    lru_.push_front(key);
    entries_.emplace(key, std::make_pair(lru_.begin(), img));
    while (entries_.size() > capacity_) {
      entries_.erase(lru_.back());
      lru_.pop_back();
    }
    return img;
  }

  std::size_t cached() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t decodes() const { return decodes_; }
  std::size_t hits() const { return hits_; }
  bool is_cached(FrameIndex frame, std::uint32_t view) const { return entries_.count({frame, view}) != 0; }

 private:
  using Key = std::pair<FrameIndex, std::uint32_t>;

  std::filesystem::path root_;
  DatasetInfo info_;
  std::size_t capacity_;
  std::list<Key> lru_;
  std::map<Key, std::pair<std::list<Key>::iterator, ImagePtr>> entries_;
  std::size_t decodes_ = 0;
  std::size_t hits_ = 0;
};

}  // namespace swings
