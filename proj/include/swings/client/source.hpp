#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "swings/codec/container.hpp"
#include "swings/core/error.hpp"
#include "swings/server/abr.hpp"

namespace swings {

// Where a player reads its stream from. init() returns the concatenated
// genesis slices; slice(f) the framed slice for frame f >= 1.
class SliceSource {
 public:
  virtual ~SliceSource() = default;
  virtual Manifest manifest() = 0;
  virtual std::vector<std::uint8_t> init() = 0;
  virtual std::vector<std::uint8_t> slice(FrameIndex f) = 0;
};

// Local container; q < 1 applies the same tail drop the server would.
class ContainerSource : public SliceSource {
 public:
  explicit ContainerSource(const std::filesystem::path& path, double quality = 1.0)
      : reader_(path), quality_(quality) {
    check_fraction(quality);
    if (!reader_.complete()) throw FormatError("container " + path.string() + " is partial");
  }

  Manifest manifest() override { return reader_.manifest(); }
  std::vector<std::uint8_t> init() override { return reader_.init_bytes(); }

  std::vector<std::uint8_t> slice(FrameIndex f) override {
    if (quality_ >= 1) return reader_.frame_bytes(f);
    const auto& m = reader_.manifest();
    return subsample_slice(reader_.read_frame(f), quality_, m.slice_size(), m.profile);
  }

 private:
  ContainerReader reader_;
  double quality_;
};

// Fetches /manifest, /init and /slice/{f}?q= from a server. 503 responses
// are retried until `patience` runs out.
class HttpSource : public SliceSource {
 public:
  HttpSource(const std::string& url, double quality = 1.0,
             std::chrono::milliseconds patience = std::chrono::seconds(30))
      : client_(url), url_(url), quality_(quality), patience_(patience) {
    check_fraction(quality);
    client_.set_connection_timeout(5);
    client_.set_read_timeout(30);
  }

  Manifest manifest() override {
    const auto body = get("/manifest");
    try {
      return Manifest::from_json(nlohmann::json::parse(body));
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(url_ + "/manifest: " + e.what());
    }
  }

  std::vector<std::uint8_t> init() override { return as_bytes(get("/init")); }

  std::vector<std::uint8_t> slice(FrameIndex f) override {
    return as_bytes(get("/slice/" + std::to_string(f) + "?q=" + format_quality()));
  }

 private:
  static std::vector<std::uint8_t> as_bytes(const std::string& s) { return {s.begin(), s.end()}; }

  std::string format_quality() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", quality_);
    return buf;
  }

  std::string get(const std::string& path) {
    const auto deadline = std::chrono::steady_clock::now() + patience_;
    for (;;) {
      auto res = client_.Get(path);
      if (!res) throw IoError(url_ + path + ": " + httplib::to_string(res.error()));
      if (res->status == 200) return res->body;
      if (res->status != 503 || std::chrono::steady_clock::now() >= deadline)
        throw ProtocolError(url_ + path + ": HTTP " + std::to_string(res->status) + " " + res->body);
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }

  httplib::Client client_;
  std::string url_;
  double quality_;
  std::chrono::milliseconds patience_;
};

}  // namespace swings
