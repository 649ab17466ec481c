#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "swings/client/camera_path.hpp"
#include "swings/client/source.hpp"
#include "swings/codec/container.hpp"
#include "swings/core/error.hpp"
#include "swings/raster/rasterizer.hpp"

namespace swings {

struct UpdateEvent {
  FrameIndex target_frame{};
  std::uint32_t slot{};
  std::shared_ptr<const DecodedSlice> slice;
  std::size_t bytes = 0;  // framed slice size as received
};

// The player's sliding buffer: swin_size slots of slice_size records each.
// Slots are immutable snapshots swapped whole, so a render sees each slot
// entirely old or entirely new.
class PlayerBuffer {
 public:
  struct Snapshot {
    FrameIndex frame{};
    std::vector<std::shared_ptr<const DecodedSlice>> slots;
  };

  PlayerBuffer(std::uint32_t swin_size, std::uint32_t slice_size)
      : swin_size_(swin_size), slice_size_(slice_size), slots_(swin_size) {
    if (swin_size == 0 || slice_size == 0) throw InvalidParameter("player buffer needs positive sizes");
  }

  std::uint32_t swin_size() const { return swin_size_; }
  std::uint32_t slice_size() const { return slice_size_; }
  bool initialized() const { return initialized_; }
  FrameIndex frame() const { return frame_.load(std::memory_order_acquire); }

  // Fills every slot from the genesis slices; each slot must appear once.
  void load_genesis(std::vector<DecodedSlice> genesis) {
    if (genesis.size() != swin_size_)
      throw ProtocolError("genesis holds " + std::to_string(genesis.size()) + " slices, expected " +
                          std::to_string(swin_size_));
    std::vector<std::shared_ptr<const DecodedSlice>> slots(swin_size_);
    for (auto& s : genesis) {
      check_shape(s);
      if (s.header.target_frame != 0) throw ProtocolError("genesis slice with target_frame " +
                                                          std::to_string(s.header.target_frame));
      const std::uint32_t slot = s.header.slice_index % swin_size_;
      if (slots[slot]) throw ProtocolError("genesis fills slot " + std::to_string(slot) + " twice");
      slots[slot] = std::make_shared<const DecodedSlice>(std::move(s));
    }
    std::lock_guard lock(mu_);
    slots_ = std::move(slots);
    initialized_ = true;
    frame_.store(0, std::memory_order_release);
  }

  // Enters frame event.target_frame, which must be the next frame, replacing
  // slot target_frame mod swin_size.
  void apply_update(const UpdateEvent& ev) {
    if (!initialized_) throw StateError("apply_update before genesis");
    if (!ev.slice) throw ProtocolError("update for frame " + std::to_string(ev.target_frame) + " has no payload");
    if (ev.target_frame % swin_size_ != ev.slot || ev.slice->header.slice_index != ev.slot)
      throw ProtocolError("frame " + std::to_string(ev.target_frame) + ": slot " + std::to_string(ev.slot) +
                          " does not match target_frame mod " + std::to_string(swin_size_));
    if (ev.slice->header.target_frame != ev.target_frame)
      throw ProtocolError("frame " + std::to_string(ev.target_frame) + ": payload targets frame " +
                          std::to_string(ev.slice->header.target_frame));
    const FrameIndex next = frame() + 1;
    if (ev.target_frame != next)
      throw ProtocolError("update for frame " + std::to_string(ev.target_frame) + " while entering frame " +
                          std::to_string(next));
    check_shape(*ev.slice);
    std::lock_guard lock(mu_);
    slots_[ev.slot] = ev.slice;
    frame_.store(next, std::memory_order_release);
  }

  Snapshot snapshot() const {
    std::lock_guard lock(mu_);
    return {frame_.load(std::memory_order_acquire), slots_};
  }

  // Real records whose lifespan covers the snapshot frame, slot-major.
  static std::vector<Gaussian<float>> active(const Snapshot& snap) {
    std::vector<Gaussian<float>> out;
    for (const auto& s : snap.slots) {
      if (!s || !is_active(s->lifespan, snap.frame)) continue;
      out.insert(out.end(), s->records.begin(), s->records.begin() + static_cast<std::ptrdiff_t>(s->kept()));
    }
    return out;
  }

  std::vector<Gaussian<float>> active() const { return active(snapshot()); }

  // Decoded records held, padding included; num_gs once initialized.
  std::size_t resident_records() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& s : slots_)
      if (s) n += s->records.size();
    return n;
  }

  Image<float> render_frame(const Camera<float>& cam) const { return render_snapshot(snapshot(), cam); }

  static Image<float> render_snapshot(const Snapshot& snap, const Camera<float>& cam) {
    const auto gs = active(snap);
    return render(cam, std::span<const Gaussian<float>>(gs));
  }

 private:
  void check_shape(const DecodedSlice& s) const {
    if (s.records.size() != slice_size_)
      throw ProtocolError("slice holds " + std::to_string(s.records.size()) + " records, expected " +
                          std::to_string(slice_size_));
  }

  std::uint32_t swin_size_;
  std::uint32_t slice_size_;
  mutable std::mutex mu_;
  std::vector<std::shared_ptr<const DecodedSlice>> slots_;
  std::atomic<FrameIndex> frame_{0};
  bool initialized_ = false;
};

// Bounded single-producer single-consumer queue with close and failure.
template <typename T>
class EventQueue {
 public:
  explicit EventQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  // False once the consumer has cancelled.
  bool push(T v) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || cancelled_; });
    if (cancelled_) return false;
    items_.push_back(std::move(v));
    not_empty_.notify_one();
    return true;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
  }

  void fail(std::exception_ptr e) {
    std::lock_guard lock(mu_);
    error_ = e;
    closed_ = true;
    not_empty_.notify_all();
  }

  void cancel() {
    std::lock_guard lock(mu_);
    cancelled_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::optional<T> try_pop() {
    std::lock_guard lock(mu_);
    return take();
  }

  // Blocks until an item arrives, the queue closes or it is cancelled.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_ || cancelled_; });
    return take();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

 private:
  std::optional<T> take() {
    if (!items_.empty()) {
      T v = std::move(items_.front());
      items_.pop_front();
      not_full_.notify_one();
      return v;
    }
    if (error_) std::rethrow_exception(error_);
    return std::nullopt;
  }

  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
  bool cancelled_ = false;
  std::exception_ptr error_;
};

struct PlayerOptions {
  double fps = 30;              // 0: advance as soon as the next slice is ready
  std::size_t queue_depth = 0;  // 0: swin_size events
};

struct PlayerSinks {
  std::function<void(FrameIndex, const Image<float>&)> frame;
  std::function<void(const nlohmann::json&)> stats;  // one object per line
};

struct PlaybackSummary {
  std::uint32_t frames_rendered = 0;
  std::uint32_t stalls = 0;
  std::uint64_t bytes_ingested = 0;
  std::size_t peak_resident_records = 0;
};

// One playback run: a reader thread (source -> decode -> queue), an updater
// (paces the clock and applies one event per frame) and a renderer (one
// render per frame). The updater waits for the render of frame f before
// entering f + 1, so every frame is rendered exactly once.
class PlaybackSession {
 public:
  PlaybackSession(std::unique_ptr<SliceSource> source, CameraPath cameras, PlayerOptions options, PlayerSinks sinks)
      : source_(std::move(source)), cameras_(std::move(cameras)), options_(options), sinks_(std::move(sinks)) {
    if (!(options_.fps >= 0)) throw InvalidParameter("fps must be non-negative");
    if (cameras_.poses.empty()) throw InvalidParameter("camera path is empty");
    manifest_ = source_->manifest();
    buffer_ = std::make_unique<PlayerBuffer>(manifest_.swin_size, manifest_.slice_size());
    queue_ = std::make_unique<EventQueue<UpdateEvent>>(options_.queue_depth ? options_.queue_depth
                                                                            : manifest_.swin_size);
    const auto init = source_->init();
    bytes::Reader r(init);
    std::vector<DecodedSlice> genesis;
    try {
      for (std::uint32_t i = 0; i < manifest_.swin_size; ++i)
        genesis.push_back(unpack_slice(r, manifest_.profile, manifest_.slice_size(), manifest_.swin_size));
      if (r.remaining() != 0) throw FormatError("trailing bytes after genesis");
    } catch (const FormatError& e) {
      throw FormatError(std::string("frame 0: ") + e.what());
    }
    buffer_->load_genesis(std::move(genesis));
    summary_.bytes_ingested = init.size();
    last_bytes_ = init.size();
    summary_.peak_resident_records = buffer_->resident_records();
    start_ = std::chrono::steady_clock::now();
    reader_ = std::thread([this] { read_loop(); });
    renderer_ = std::thread([this] { render_loop(); });
    updater_ = std::thread([this] { update_loop(); });
  }

  ~PlaybackSession() {
    stop();
    join();
  }

  PlaybackSession(const PlaybackSession&) = delete;
  PlaybackSession& operator=(const PlaybackSession&) = delete;

  const Manifest& manifest() const { return manifest_; }
  const PlayerBuffer& buffer() const { return *buffer_; }

  // Blocks until playback ends; rethrows the first error of any task.
  PlaybackSummary wait() {
    join();
    if (error_) std::rethrow_exception(error_);
    return summary_;
  }

  void stop() {
    stopping_ = true;
    queue_->cancel();
    std::lock_guard lock(mu_);
    cv_.notify_all();
  }

 private:
  void join() {
    for (auto* t : {&reader_, &updater_, &renderer_})
      if (t->joinable()) t->join();
  }

  void record_error(std::exception_ptr e) {
    {
      std::lock_guard lock(mu_);
      if (!error_) error_ = e;
    }
    stop();
  }

  void emit(const nlohmann::json& j) {
    std::lock_guard lock(emit_mu_);
    if (sinks_.stats) sinks_.stats(j);
  }

  // Adds frame context while keeping the error category.
  static std::exception_ptr with_frame(FrameIndex f, const Error& e) {
    const std::string msg = "frame " + std::to_string(f) + ": " + e.what();
    if (dynamic_cast<const IoError*>(&e)) return std::make_exception_ptr(IoError(msg));
    if (dynamic_cast<const ProtocolError*>(&e)) return std::make_exception_ptr(ProtocolError(msg));
    return std::make_exception_ptr(FormatError(msg));
  }

  void read_loop() {
    FrameIndex f = 1;
    try {
      for (; f < manifest_.total_frames && !stopping_; ++f) {
        const auto bytes = source_->slice(f);
        auto slice = std::make_shared<DecodedSlice>(
            unpack_slice(bytes, manifest_.profile, manifest_.slice_size(), manifest_.swin_size));
        const std::uint32_t slot = slice->header.slice_index;
        if (!queue_->push({f, slot, std::move(slice), bytes.size()})) return;
      }
      queue_->close();
    } catch (const Error& e) {
      queue_->fail(with_frame(f, e));
    } catch (...) {
      queue_->fail(std::current_exception());
    }
  }

  void update_loop() {
    try {
      for (FrameIndex f = 1; f < manifest_.total_frames; ++f) {
        {
          std::unique_lock lock(mu_);
          cv_.wait(lock, [&] { return rendered_ + 1 == static_cast<std::int64_t>(f) || stopping_; });
        }
        if (stopping_) return;
        if (options_.fps > 0) {
          const auto due = start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                        std::chrono::duration<double>(f / options_.fps));
          std::this_thread::sleep_until(due);
        }
        auto ev = queue_->try_pop();
        if (!ev) {
          const auto waited_from = std::chrono::steady_clock::now();
          ++summary_.stalls;
          emit({{"event", "stall"}, {"frame", f - 1}, {"waiting_for", f}});
          ev = queue_->pop();
          if (!ev) {
            if (stopping_) return;
            throw ProtocolError("stream ended before frame " + std::to_string(f));
          }
          const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - waited_from)
                                .count();
          emit({{"event", "resume"}, {"frame", f}, {"stalled_ms", ms}});
          if (options_.fps > 0) start_ = std::chrono::steady_clock::now() - std::chrono::duration_cast<
                                              std::chrono::steady_clock::duration>(
                                              std::chrono::duration<double>(f / options_.fps));
        }
        buffer_->apply_update(*ev);
        {
          std::lock_guard lock(mu_);
          summary_.bytes_ingested += ev->bytes;
          last_bytes_ = ev->bytes;
          summary_.peak_resident_records = std::max(summary_.peak_resident_records, buffer_->resident_records());
          cv_.notify_all();
        }
      }
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return rendered_ + 1 == static_cast<std::int64_t>(manifest_.total_frames) || stopping_; });
    } catch (...) {
      record_error(std::current_exception());
    }
  }

  void render_loop() {
    try {
      for (FrameIndex f = 0; f < manifest_.total_frames; ++f) {
        PlayerBuffer::Snapshot snap;
        std::size_t bytes = 0;
        {
          std::unique_lock lock(mu_);
          cv_.wait(lock, [&] { return buffer_->frame() >= f || stopping_; });
          if (stopping_) return;
          snap = buffer_->snapshot();
          bytes = last_bytes_;
        }
        if (snap.frame != f) throw ConsistencyError("renderer skipped to frame " + std::to_string(snap.frame));
        const auto t0 = std::chrono::steady_clock::now();
        const auto active = PlayerBuffer::active(snap);
        const auto img = render(cameras_.at(f), std::span<const Gaussian<float>>(active));
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (sinks_.frame) sinks_.frame(f, img);
        emit({{"event", "frame"}, {"frame", f}, {"bytes", bytes}, {"active", active.size()}, {"render_ms", ms}});
        std::lock_guard lock(mu_);
        rendered_ = f;
        ++summary_.frames_rendered;
        cv_.notify_all();
      }
    } catch (...) {
      record_error(std::current_exception());
    }
  }

  std::unique_ptr<SliceSource> source_;
  CameraPath cameras_;
  PlayerOptions options_;
  PlayerSinks sinks_;
  Manifest manifest_;
  std::unique_ptr<PlayerBuffer> buffer_;
  std::unique_ptr<EventQueue<UpdateEvent>> queue_;
  std::chrono::steady_clock::time_point start_;

  std::mutex mu_;
  std::mutex emit_mu_;
  std::condition_variable cv_;
  std::int64_t rendered_ = -1;
  std::size_t last_bytes_ = 0;
  PlaybackSummary summary_;
  std::exception_ptr error_;
  std::atomic<bool> stopping_{false};

  std::thread reader_, updater_, renderer_;
};

inline std::unique_ptr<PlaybackSession> start_player(std::unique_ptr<SliceSource> source, CameraPath cameras,
                                                     PlayerOptions options = {}, PlayerSinks sinks = {}) {
  return std::make_unique<PlaybackSession>(std::move(source), std::move(cameras), options, std::move(sinks));
}

// Runs a session to completion.
inline PlaybackSummary play(std::unique_ptr<SliceSource> source, CameraPath cameras, PlayerOptions options = {},
                            PlayerSinks sinks = {}) {
  return start_player(std::move(source), std::move(cameras), options, std::move(sinks))->wait();
}

}  // namespace swings
