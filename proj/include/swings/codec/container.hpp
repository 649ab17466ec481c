#pragma once

#include <zlib.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "swings/codec/bytes.hpp"
#include "swings/codec/record.hpp"
#include "swings/codec/slice.hpp"
#include "swings/core/error.hpp"
#include "swings/core/gaussian.hpp"

namespace swings {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kManifestBytes = 60;

inline std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  std::size_t pos = 0;
  while (pos < data.size()) {
    const std::size_t n = std::min<std::size_t>(data.size() - pos, 1u << 30);
    crc = ::crc32(crc, data.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

struct Manifest {
  std::uint32_t version = kFormatVersion;
  std::uint32_t num_gs{};
  std::uint32_t swin_size{};
  float fps{};
  std::uint32_t total_frames{};
  Profile profile = Profile::kQuantized;
  std::array<float, 6> bounds{};  // min xyz, max xyz
  std::uint32_t camera_count{};

  bool operator==(const Manifest&) const = default;

  std::uint32_t slice_size() const { return num_gs / swin_size; }
  std::size_t frame_section_bytes() const { return slice_bytes(slice_size(), profile); }

  StreamParams params() const {
    return {swin_size, num_gs, fps, static_cast<std::uint32_t>(record_size(profile)), total_frames};
  }

  void validate() const {
    if (version != kFormatVersion)
      throw FormatError("manifest: unsupported format version " + std::to_string(version));
    params().validate();
    if (swin_size > 256) throw InvalidParameter("manifest: swin_size must be at most 256");
    if (total_frames == 0) throw InvalidParameter("manifest: total_frames must be positive");
  }

  std::vector<std::uint8_t> encode() const {
    std::vector<std::uint8_t> out;
    bytes::put_tag(out, "SWGM");
    bytes::put_u32(out, version);
    bytes::put_u32(out, num_gs);
    bytes::put_u32(out, swin_size);
    bytes::put_f32(out, fps);
    bytes::put_u32(out, total_frames);
    bytes::put_u8(out, static_cast<std::uint8_t>(profile));
    for (int i = 0; i < 3; ++i) bytes::put_u8(out, 0);
    for (float b : bounds) bytes::put_f32(out, b);
    bytes::put_u32(out, camera_count);
    bytes::put_u32(out, crc32_of(out));
    return out;
  }

  static Manifest decode(bytes::Reader& r) {
    if (!r.tag_is("SWGM")) throw FormatError("manifest: bad magic");
    Manifest m;
    m.version = r.u32();
    if (m.version != kFormatVersion)
      throw FormatError("manifest: unsupported format version " + std::to_string(m.version));
    m.num_gs = r.u32();
    m.swin_size = r.u32();
    m.fps = r.f32();
    m.total_frames = r.u32();
    m.profile = profile_from_id(r.u8());
    r.take(3);
    for (float& b : m.bounds) b = r.f32();
    m.camera_count = r.u32();
    return m;
  }

  nlohmann::json to_json() const {
    return {{"version", version},
            {"num_gs", num_gs},
            {"swin_size", swin_size},
            {"slice_size", slice_size()},
            {"fps", fps},
            {"total_frames", total_frames},
            {"profile", static_cast<int>(profile)},
            {"record_bytes", record_size(profile)},
            {"frame_section_bytes", frame_section_bytes()},
            {"bounds", bounds},
            {"camera_count", camera_count}};
  }

  // Inverse of to_json; derived fields are checked for consistency.
  static Manifest from_json(const nlohmann::json& j) {
    Manifest m;
    try {
      m.version = j.at("version").get<std::uint32_t>();
      m.num_gs = j.at("num_gs").get<std::uint32_t>();
      m.swin_size = j.at("swin_size").get<std::uint32_t>();
      m.fps = j.at("fps").get<float>();
      m.total_frames = j.at("total_frames").get<std::uint32_t>();
      m.profile = profile_from_id(j.at("profile").get<std::uint32_t>());
      m.bounds = j.at("bounds").get<std::array<float, 6>>();
      m.camera_count = j.at("camera_count").get<std::uint32_t>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("manifest json: ") + e.what());
    }
    m.validate();
    if (j.contains("slice_size") && j["slice_size"] != m.slice_size())
      throw FormatError("manifest json: slice_size disagrees with num_gs / swin_size");
    return m;
  }
};

// Layout: manifest(+crc) | init: swin_size genesis slices, crc | per frame:
// slice, crc | "SWGE" count  (or "SWGP" count when training aborted).
class ContainerWriter {
 public:
  ContainerWriter(const std::filesystem::path& path, const Manifest& manifest) : manifest_(manifest), path_(path) {
    manifest_.validate();
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    put(manifest_.encode());
  }

  ContainerWriter(const ContainerWriter&) = delete;
  ContainerWriter& operator=(const ContainerWriter&) = delete;

  ~ContainerWriter() {
    if (!closed_) {
      try {
        abort();
      } catch (...) {
      }
    }
  }

  const Manifest& manifest() const { return manifest_; }

  // Framed genesis slices in ascending-expire order, each carrying slice_size records.
  void write_init(std::span<const std::vector<std::uint8_t>> slices) {
    if (closed_ || init_written_) throw StateError("container: init block already written or container closed");
    if (slices.size() != manifest_.swin_size)
      throw InvalidParameter("container: init block needs " + std::to_string(manifest_.swin_size) + " slices");
    std::vector<std::uint8_t> section;
    for (const auto& s : slices) {
      check_slice(s, true);
      section.insert(section.end(), s.begin(), s.end());
    }
    put_section(section);
    init_written_ = true;
  }

  void write_frame(std::span<const std::uint8_t> slice) {
    if (closed_ || !init_written_) throw StateError("container: frame written before init block or after close");
    if (frames_ + 1 >= manifest_.total_frames) throw StateError("container: more frames than the manifest declares");
    check_slice(slice, false);
    put_section(slice);
    ++frames_;
  }

  std::uint32_t frames_written() const { return frames_; }

  void finish() {
    if (closed_) throw StateError("container already closed");
    if (!init_written_ || frames_ + 1 != manifest_.total_frames)
      throw StateError("container: finish() before all " + std::to_string(manifest_.total_frames) +
                       " frames were written");
    end("SWGE");
  }

  // Marks the file as partial; readers and the server refuse to stream it.
  void abort() {
    if (closed_) return;
    end("SWGP");
  }

 private:
  void check_slice(std::span<const std::uint8_t> s, bool full) {
    bytes::Reader r(s);
    const SliceHeader h = read_slice_header(r);
    if (h.kept_count > manifest_.slice_size()) throw InvalidParameter("container: kept_count exceeds slice_size");
    if (full && h.kept_count != manifest_.slice_size())
      throw InvalidParameter("container: genesis slices must be complete");
    if (r.remaining() != static_cast<std::size_t>(h.kept_count) * record_size(manifest_.profile))
      throw InvalidParameter("container: slice payload length does not match kept_count");
  }

  void put(std::span<const std::uint8_t> b) {
    out_.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    if (!out_) throw IoError("write failed on " + path_.string());
  }

  void put_section(std::span<const std::uint8_t> b) {
    put(b);
    std::vector<std::uint8_t> crc;
    bytes::put_u32(crc, crc32_of(b));
    put(crc);
    out_.flush();
  }

  void end(const char (&tag)[5]) {
    closed_ = true;
    std::vector<std::uint8_t> tail;
    bytes::put_tag(tail, tag);
    bytes::put_u32(tail, frames_);
    put(tail);
    out_.close();
    if (!out_) throw IoError("close failed on " + path_.string());
  }

  Manifest manifest_;
  std::filesystem::path path_;
  std::ofstream out_;
  bool init_written_ = false;
  bool closed_ = false;
  std::uint32_t frames_ = 0;
};

// Random-access reader over a container file. Section boundaries are indexed
// from slice headers at open time; payloads are read and CRC-checked on demand.
// Methods are internally serialized so one reader may be shared.
class ContainerReader {
 public:
  explicit ContainerReader(const std::filesystem::path& path) : path_(path) {
    in_.open(path, std::ios::binary);
    if (!in_) throw IoError("cannot open container " + path.string());
    in_.seekg(0, std::ios::end);
    file_size_ = static_cast<std::uint64_t>(in_.tellg());
    index();
  }

  const Manifest& manifest() const { return manifest_; }
  const std::filesystem::path& path() const { return path_; }

  // True only when the end marker is present; partial and truncated files are false.
  bool complete() const { return complete_; }
  bool has_init() const { return init_.has_value(); }
  // Frame sections present, covering frames 1..frame_count().
  std::uint32_t frame_count() const { return static_cast<std::uint32_t>(frames_.size()); }

  // Concatenated framed genesis slices.
  std::vector<std::uint8_t> init_bytes() const {
    if (!init_) throw FormatError("container " + path_.string() + " has no complete init block");
    return read_section(*init_, "init block");
  }

  // Framed slice for frame f in [1, frame_count()].
  std::vector<std::uint8_t> frame_bytes(FrameIndex f) const {
    if (f == 0 || f > frames_.size())
      throw InvalidParameter("container: no slice for frame " + std::to_string(f));
    return read_section(frames_[f - 1], "frame " + std::to_string(f));
  }

  std::vector<DecodedSlice> read_init() const {
    const auto data = init_bytes();
    bytes::Reader r(data);
    std::vector<DecodedSlice> out;
    for (std::uint32_t i = 0; i < manifest_.swin_size; ++i)
      out.push_back(unpack_slice(r, manifest_.profile, manifest_.slice_size(), manifest_.swin_size));
    return out;
  }

  DecodedSlice read_frame(FrameIndex f) const {
    return unpack_slice(frame_bytes(f), manifest_.profile, manifest_.slice_size(), manifest_.swin_size);
  }

  // Sequential access: init first, then one slice per call until the end.
  std::vector<DecodedSlice> read_genesis() {
    cursor_ = 1;
    return read_init();
  }
  std::optional<DecodedSlice> next_slice() {
    if (cursor_ == 0) throw StateError("container: next_slice() before read_genesis()");
    if (cursor_ > frames_.size()) return std::nullopt;
    return read_frame(cursor_++);
  }

  std::uint64_t total_bytes() const { return file_size_; }

 private:
  struct Section {
    std::uint64_t offset;
    std::uint64_t length;  // excluding the trailing crc
  };

  std::vector<std::uint8_t> read_at(std::uint64_t offset, std::uint64_t n) const {
    std::vector<std::uint8_t> buf(n);
    std::lock_guard lock(mu_);
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(offset));
    in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::uint64_t>(in_.gcount()) != n)
      throw FormatError("container " + path_.string() + ": truncated at offset " + std::to_string(offset));
    return buf;
  }

  std::vector<std::uint8_t> read_section(const Section& s, const std::string& what) const {
    auto buf = read_at(s.offset, s.length + 4);
    bytes::Reader tail(std::span<const std::uint8_t>(buf).subspan(s.length));
    const std::uint32_t stored = tail.u32();
    buf.resize(s.length);
    if (crc32_of(buf) != stored) throw FormatError("container " + path_.string() + ": CRC mismatch in " + what);
    return buf;
  }

  bool fits(std::uint64_t offset, std::uint64_t n) const { return offset + n <= file_size_; }

  // Reads the slice header at `offset` and returns the framed slice length.
  std::uint64_t framed_length(std::uint64_t offset) const {
    const auto head = read_at(offset, kSliceHeaderBytes);
    bytes::Reader r(head);
    const SliceHeader h = read_slice_header(r);
    if (h.kept_count > manifest_.slice_size())
      throw FormatError("container " + path_.string() + ": kept_count exceeds slice_size");
    return slice_bytes(h.kept_count, manifest_.profile);
  }

  void index() {
    if (!fits(0, kManifestBytes)) throw FormatError("container " + path_.string() + ": truncated manifest");
    const auto head = read_at(0, kManifestBytes);
    bytes::Reader r(head);
    manifest_ = Manifest::decode(r);
    const std::uint32_t stored = r.u32();
    if (crc32_of(std::span<const std::uint8_t>(head).first(kManifestBytes - 4)) != stored)
      throw FormatError("container " + path_.string() + ": manifest CRC mismatch");
    manifest_.validate();

    std::uint64_t pos = kManifestBytes;
    std::uint64_t init_len = 0;
    for (std::uint32_t i = 0; i < manifest_.swin_size; ++i) {
      if (!fits(pos + init_len, kSliceHeaderBytes)) return;
      if (!is_slice_at(pos + init_len)) return;
      init_len += framed_length(pos + init_len);
    }
    if (!fits(pos, init_len + 4)) return;
    init_ = Section{pos, init_len};
    pos += init_len + 4;

    while (fits(pos, 4)) {
      const auto tag = read_at(pos, 4);
      const std::string t(tag.begin(), tag.end());
      if (t == "SWGS") {
        if (!fits(pos, kSliceHeaderBytes)) return;
        const std::uint64_t len = framed_length(pos);
        if (!fits(pos, len + 4)) return;
        frames_.push_back({pos, len});
        pos += len + 4;
      } else if (t == "SWGE" || t == "SWGP") {
        if (!fits(pos, 8)) return;
        const auto tail = read_at(pos + 4, 4);
        bytes::Reader tr(tail);
        const std::uint32_t count = tr.u32();
        if (count != frames_.size())
          throw FormatError("container " + path_.string() + ": end marker counts " + std::to_string(count) +
                            " frames, found " + std::to_string(frames_.size()));
        if (t == "SWGE") {
          if (frames_.size() + 1 != manifest_.total_frames)
            throw FormatError("container " + path_.string() + ": manifest declares " +
                              std::to_string(manifest_.total_frames) + " frames, file holds " +
                              std::to_string(frames_.size() + 1));
          complete_ = true;
        }
        return;
      } else {
        throw FormatError("container " + path_.string() + ": unexpected tag at offset " + std::to_string(pos));
      }
    }
  }

  bool is_slice_at(std::uint64_t offset) const {
    const auto tag = read_at(offset, 4);
    return std::string(tag.begin(), tag.end()) == "SWGS";
  }

  std::filesystem::path path_;
  mutable std::ifstream in_;
  mutable std::mutex mu_;
  std::uint64_t file_size_ = 0;
  Manifest manifest_;
  std::optional<Section> init_;
  std::vector<Section> frames_;
  bool complete_ = false;
  std::uint32_t cursor_ = 0;
};

}  // namespace swings
