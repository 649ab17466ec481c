#pragma once

#include <atomic>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "swings/codec/container.hpp"
#include "swings/core/error.hpp"
#include "swings/server/abr.hpp"

namespace swings {

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path container;
  double quality = 1.0;  // used when a request carries no q
  bool cache = true;

  void validate() const {
    check_fraction(quality);
    if (port < 0 || port > 65535) throw InvalidParameter("port must lie in [0, 65535]");
    if (container.empty()) throw InvalidParameter("container path is required");
  }
};

// Parses a q parameter; nullopt when it is not a number in (0,1].
inline std::optional<double> parse_quality(const std::string& text) {
  double v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !(v > 0 && v <= 1)) return std::nullopt;
  return v;
}

// Transport-independent core of the server. The container is opened
// read-only; a partial container is re-opened on demand until it completes.
class SliceService {
 public:
  explicit SliceService(std::filesystem::path path, bool cache = true)
      : path_(std::move(path)), cache_enabled_(cache), reader_(std::make_shared<const ContainerReader>(path_)) {}

  // Current reader, refreshed from disk while the container is partial.
  std::shared_ptr<const ContainerReader> reader() {
    std::lock_guard lock(reader_mu_);
    if (!reader_->complete()) {
      try {
        reader_ = std::make_shared<const ContainerReader>(path_);
      } catch (const Error&) {
        // A writer may be mid-section; keep the previous view.
      }
    }
    return reader_;
  }

  bool ready() { return reader()->complete(); }

  nlohmann::json manifest_json() {
    const auto r = reader();
    auto j = r->manifest().to_json();
    j["complete"] = r->complete();
    j["frames_available"] = r->has_init() ? r->frame_count() + 1 : 0;
    return j;
  }

  std::vector<std::uint8_t> init_bytes() { return ready_reader()->init_bytes(); }

  // Framed slice for frame f >= 1 at quality q. q = 1 is a pass-through.
  std::shared_ptr<const std::vector<std::uint8_t>> slice(FrameIndex f, double q) {
    check_fraction(q);
    const auto r = ready_reader();
    if (f == 0 || f > r->frame_count()) throw InvalidParameter("no slice for frame " + std::to_string(f));
    const std::uint32_t kept = abr_kept_count(q, r->manifest().slice_size());
    const auto key = std::make_pair(f, kept);
    if (cache_enabled_) {
      std::lock_guard lock(cache_mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    std::shared_ptr<const std::vector<std::uint8_t>> out;
    if (kept >= r->manifest().slice_size()) {
      out = std::make_shared<const std::vector<std::uint8_t>>(r->frame_bytes(f));
    } else {
      const auto& m = r->manifest();
      out = std::make_shared<const std::vector<std::uint8_t>>(
          subsample_slice(r->read_frame(f), q, m.slice_size(), m.profile));
    }
    if (cache_enabled_) {
      std::lock_guard lock(cache_mu_);
      return cache_.emplace(key, out).first->second;  // first publisher wins
    }
    return out;
  }

  std::size_t cache_entries() const {
    std::lock_guard lock(cache_mu_);
    return cache_.size();
  }

 private:
  std::shared_ptr<const ContainerReader> ready_reader() {
    auto r = reader();
    if (!r->complete()) throw StateError("container " + path_.string() + " is still being written");
    return r;
  }

  std::filesystem::path path_;
  bool cache_enabled_;
  std::mutex reader_mu_;
  std::shared_ptr<const ContainerReader> reader_;
  mutable std::mutex cache_mu_;
  std::map<std::pair<FrameIndex, std::uint32_t>, std::shared_ptr<const std::vector<std::uint8_t>>> cache_;
};

// HTTP front end:
//   GET /manifest           JSON manifest
//   GET /init               genesis slices
//   GET /slice/{f}?q=       one framed slice, tail-dropped when q < 1
//   GET /stream?q=          chunked: init then every slice in order
class StreamServer {
 public:
  explicit StreamServer(ServeConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    service_ = std::make_shared<SliceService>(cfg_.container, cfg_.cache);
    routes();
  }

  ~StreamServer() { stop(); }

  StreamServer(const StreamServer&) = delete;
  StreamServer& operator=(const StreamServer&) = delete;

  // Binds the socket and returns the port actually in use.
  int bind() {
    if (cfg_.port == 0) {
      port_ = http_.bind_to_any_port(cfg_.host);
      if (port_ < 0) throw IoError("cannot bind " + cfg_.host);
    } else {
      if (!http_.bind_to_port(cfg_.host, cfg_.port))
        throw IoError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
      port_ = cfg_.port;
    }
    return port_;
  }

  // Blocks until stop().
  void run() {
    if (port_ < 0) bind();
    http_.listen_after_bind();
  }

  // Serves on a background thread; returns the bound port.
  int start() {
    const int port = bind();
    thread_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
    return port;
  }

  void stop() {
    http_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  SliceService& service() { return *service_; }

 private:
  static void error(httplib::Response& res, int status, const std::string& msg) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", msg}}.dump(), "application/json");
  }

  // Maps service exceptions onto status codes.
  template <typename F>
  static void guarded(httplib::Response& res, F&& body) {
    try {
      body();
    } catch (const StateError& e) {
      error(res, 503, e.what());
      res.set_header("Retry-After", "1");
    } catch (const InvalidParameter& e) {
      error(res, 404, e.what());
    } catch (const Error& e) {
      error(res, 500, e.what());
    }
  }

  std::optional<double> quality(const httplib::Request& req, httplib::Response& res) const {
    if (!req.has_param("q")) return cfg_.quality;
    const auto q = parse_quality(req.get_param_value("q"));
    if (!q) error(res, 400, "q must be a number in (0,1]");
    return q;
  }

  void routes() {
    http_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                               {"Access-Control-Allow-Headers", "Range"},
                               {"Access-Control-Expose-Headers", "Content-Length, Content-Range"}});
    http_.Options(".*", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
      res.status = 204;
    });

    http_.Get("/manifest", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { res.set_content(service_->manifest_json().dump(), "application/json"); });
    });

    http_.Get("/init", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        const auto bytes = service_->init_bytes();
        res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(), "application/octet-stream");
      });
    });

    http_.Get(R"(/slice/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto q = quality(req, res);
      if (!q) return;
      guarded(res, [&] {
        FrameIndex f = 0;
        const std::string text = req.matches[1];
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), f);
        if (ec != std::errc() || ptr != text.data() + text.size())
          throw InvalidParameter("no slice for frame " + text);
        const auto bytes = service_->slice(f, *q);
        res.set_content(reinterpret_cast<const char*>(bytes->data()), bytes->size(), "application/octet-stream");
      });
    });

    http_.Get("/stream", [this](const httplib::Request& req, httplib::Response& res) {
      const auto q = quality(req, res);
      if (!q) return;
      guarded(res, [&] {
        auto reader = service_->reader();
        if (!reader->complete()) throw StateError("container is still being written");
        const std::uint32_t frames = reader->frame_count();
        auto service = service_;
        const double fraction = *q;
        auto next = std::make_shared<FrameIndex>(0);
        res.set_chunked_content_provider(
            "application/octet-stream",
            [service, fraction, frames, next](std::size_t, httplib::DataSink& sink) {
              if (*next > frames) {
                sink.done();
                return true;
              }
              try {
                if (*next == 0) {
                  const auto init = service->init_bytes();
                  sink.write(reinterpret_cast<const char*>(init.data()), init.size());
                } else {
                  const auto s = service->slice(*next, fraction);
                  sink.write(reinterpret_cast<const char*>(s->data()), s->size());
                }
              } catch (const Error&) {
                return false;  // drops the connection mid-body
              }
              ++*next;
              return true;
            });
      });
    });
  }

  ServeConfig cfg_;
  std::shared_ptr<SliceService> service_;
  httplib::Server http_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace swings
