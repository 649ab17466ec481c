#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"
#include "swings/core/error.hpp"
#include "swings/core/gaussian.hpp"
#include "swings/train/dataset.hpp"

namespace swings {

// Scripted per-frame camera poses. Frames past the end hold the last pose.
struct CameraPath {
  std::vector<Camera<float>> poses;

  const Camera<float>& at(FrameIndex f) const {
    if (poses.empty()) throw InvalidParameter("camera path is empty");
    return poses[std::min<std::size_t>(f, poses.size() - 1)];
  }

  nlohmann::json to_json() const {
    if (poses.empty()) throw InvalidParameter("camera path is empty");
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : poses) list.push_back(camera_to_json(p.cast<double>()));
    return {{"width", poses.front().width}, {"height", poses.front().height}, {"poses", list}};
  }

  static CameraPath from_json(const nlohmann::json& j) {
    CameraPath path;
    try {
      const int w = j.at("width").get<int>(), h = j.at("height").get<int>();
      for (const auto& p : j.at("poses")) path.poses.push_back(camera_from_json(p, w, h).cast<float>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("camera path: ") + e.what());
    } catch (const InvalidParameter& e) {
      throw FormatError(std::string("camera path: ") + e.what());
    }
    if (path.poses.empty()) throw FormatError("camera path: no poses");
    return path;
  }

  static CameraPath load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open camera path " + file.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(file.string() + ": " + e.what());
    }
  }

  void save(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write camera path " + file.string());
    out << to_json().dump(2) << '\n';
  }
};

// Horizontal arc around the origin: `frames` poses from azimuth start_deg to
// end_deg at the given elevation, looking at the origin.
inline CameraPath orbit_path(std::uint32_t frames, int width, int height, double focal, double distance,
                             double start_deg, double end_deg, double elevation_deg = 0) {
  if (frames == 0) throw InvalidParameter("orbit_path: frames must be positive");
  CameraPath path;
  const double el = elevation_deg * std::numbers::pi / 180;
  for (std::uint32_t f = 0; f < frames; ++f) {
    const double t = frames > 1 ? static_cast<double>(f) / (frames - 1) : 0.0;
    const double az = (start_deg + t * (end_deg - start_deg)) * std::numbers::pi / 180;
    const Vec3<double> eye{distance * std::sin(az) * std::cos(el), -distance * std::sin(el),
                           -distance * std::cos(az) * std::cos(el)};
    path.poses.push_back(look_at<double>(width, height, focal, focal, eye, {0, 0, 0}).cast<float>());
  }
  return path;
}

}  // namespace swings
