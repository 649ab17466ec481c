#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "swings/client/archive.hpp"
#include "swings/client/player.hpp"
#include "swings/codec/bandwidth.hpp"
#include "swings/codec/container.hpp"
#include "swings/core/error.hpp"
#include "swings/raster/png_io.hpp"
#include "swings/raster/rasterizer.hpp"
#include "swings/server/server.hpp"
#include "swings/train/synth.hpp"
#include "swings/train/trainer.hpp"

namespace swings::cli {

enum ExitCode : int { kOk = 0, kUserError = 1, kInternalError = 2 };

inline std::filesystem::path frame_png(const std::filesystem::path& dir, FrameIndex f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05u.png", f);
  return dir / buf;
}

struct ViewOptions {
  std::string camera_path;
  int width = 64;
  int height = 64;
  double focal = 70;
  double distance = 4;

  void add(CLI::App* cmd) {
    cmd->add_option("--camera-path", camera_path, "JSON file of per-frame camera poses");
    cmd->add_option("--width", width, "Image width when no camera path is given")->check(CLI::PositiveNumber);
    cmd->add_option("--height", height, "Image height when no camera path is given")->check(CLI::PositiveNumber);
    cmd->add_option("--focal", focal, "Focal length in pixels when no camera path is given")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--distance", distance, "Camera distance from the origin when no camera path is given")
        ->check(CLI::PositiveNumber);
  }

  // The scripted path, or a fixed front-facing camera.
  CameraPath path() const {
    if (!camera_path.empty()) return CameraPath::load(camera_path);
    return orbit_path(1, width, height, focal, distance, 0, 0);
  }
};

struct SynthArgs {
  SynthOptions opt;
  std::string out;
};

struct TrainArgs {
  std::string data, config, out;
  std::optional<std::uint32_t> num_gs, swin, genesis_iters, window_iters, profile;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint32_t> holdout;
  bool quiet = false;
};

struct InspectArgs {
  std::string container;
  std::optional<double> fps;
  bool json = false;
  std::string render_all;
  ViewOptions view;
};

struct ServeArgs {
  std::string addr = "127.0.0.1:8080";
  std::string container;
  double quality = 1.0;
};

struct PlayArgs {
  std::string url, file, out_dir, stats;
  std::optional<double> fps;
  double quality = 1.0;
  std::size_t queue_depth = 0;
  ViewOptions view;
};

struct BenchArgs {
  std::uint32_t gaussians = 2000;
  int size = 128;
  int reps = 5;
  std::uint64_t seed = 1;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto r = synth_scene(a.opt, a.out);
  out << "wrote " << r.info.total_frames << " frames x " << r.info.cameras.size() << " views ("
      << r.info.width << "x" << r.info.height << ") to " << a.out << "\n";
  return kOk;
}

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : TrainConfig::load(a.config);
  if (a.num_gs) cfg.num_gs = *a.num_gs;
  if (a.swin) cfg.swin_size = *a.swin;
  if (a.genesis_iters) cfg.genesis_iterations = *a.genesis_iters;
  if (a.window_iters) cfg.window_iterations = *a.window_iters;
  if (a.profile) cfg.profile = profile_from_id(*a.profile);
  if (a.seed) cfg.rng_seed = *a.seed;
  if (!a.holdout.empty()) cfg.holdout_views = a.holdout;
  cfg.validate();
  FrameDataset data(a.data, cfg.max_cached_frames);
  TrainHooks hooks;
  if (!a.quiet) hooks.log = &err;
  const auto t0 = std::chrono::steady_clock::now();
  const auto sum = train_video(data, cfg, a.out, hooks);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << "trained " << sum.frames << " frames in " << secs << " s: " << sum.records_written << " records, "
      << sum.bytes_written << " slice bytes -> " << a.out << "\n";
  return kOk;
}

inline nlohmann::json inspect_report(const ContainerReader& r, std::optional<double> fps) {
  const Manifest& m = r.manifest();
  nlohmann::json j = m.to_json();
  j["complete"] = r.complete();
  j["file_bytes"] = r.total_bytes();
  std::uint64_t records = 0;
  if (r.has_init()) {
    std::uint64_t init_records = 0;
    for (const auto& s : r.read_init()) init_records += s.kept();
    j["init_records"] = init_records;
    j["init_bytes"] = r.init_bytes().size();
    records += init_records;
  }
  nlohmann::json frames = nlohmann::json::array();
  std::uint64_t payload = 0;
  for (FrameIndex f = 1; f <= r.frame_count(); ++f) {
    const auto s = r.read_frame(f);
    const auto bytes = r.frame_bytes(f).size();
    frames.push_back({{"frame", f}, {"slot", s.header.slice_index}, {"records", s.kept()}, {"bytes", bytes}});
    records += s.kept();
    payload += bytes;
  }
  j["frames"] = frames;
  j["records"] = records;
  j["frame_payload_bytes"] = payload;
  j["expected_frame_bytes"] = m.slice_size() * record_size(m.profile) + kSliceHeaderBytes;
  StreamParams p = m.params();
  if (fps) p.fps = *fps;
  const auto bw = bandwidth(p);
  j["bandwidth"] = {{"fps", p.fps},
                    {"payload_bytes_per_second", bw.payload_bytes_per_second},
                    {"header_bytes_per_second", bw.header_bytes_per_second},
                    {"total_bytes_per_second", bw.total()}};
  return j;
}

inline int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  ContainerReader r(a.container);
  const auto j = inspect_report(r, a.fps);
  if (a.json) {
    out << j.dump(2) << "\n";
  } else {
    out << "container      " << a.container << (r.complete() ? "" : " (partial)") << "\n"
        << "num_gs         " << j["num_gs"] << "\n"
        << "swin_size      " << j["swin_size"] << "\n"
        << "slice_size     " << j["slice_size"] << "\n"
        << "profile        " << j["profile"] << " (" << j["record_bytes"] << " B/record)\n"
        << "total_frames   " << j["total_frames"] << "\n"
        << "records        " << j["records"] << "\n";
    if (j.contains("init_bytes")) out << "init           " << j["init_records"] << " records, " << j["init_bytes"] << " B\n";
    out << "frame bytes    " << j["expected_frame_bytes"] << " expected per frame (slice_size x record + "
        << kSliceHeaderBytes << ")\n";
    for (const auto& f : j["frames"])
      out << "  frame " << f["frame"] << " slot " << f["slot"] << ": " << f["records"] << " records, " << f["bytes"]
          << " B\n";
    const auto& bw = j["bandwidth"];
    out << "bandwidth @" << bw["fps"] << " fps: " << bw["payload_bytes_per_second"] << " B/s payload + "
        << bw["header_bytes_per_second"] << " B/s headers = " << bw["total_bytes_per_second"] << " B/s\n";
  }
  if (!a.render_all.empty()) {
    if (!r.complete()) throw FormatError("cannot render a partial container");
    const Archive archive(r);
    const auto path = a.view.path();
    std::filesystem::create_directories(a.render_all);
    for (FrameIndex f = 0; f < r.manifest().total_frames; ++f)
      write_png(frame_png(a.render_all, f), archive.render(f, path.at(f)));
    if (!a.json) out << "rendered " << r.manifest().total_frames << " frames to " << a.render_all << "\n";
  }
  return kOk;
}

inline std::pair<std::string, int> split_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw InvalidParameter("--addr must be host:port, got '" + addr + "'");
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw InvalidParameter("--addr has a bad port: '" + addr + "'");
  }
  return {addr.substr(0, colon), port};
}

inline int cmd_serve(const ServeArgs& a, std::ostream& out) {
  ServeConfig cfg;
  std::tie(cfg.host, cfg.port) = split_addr(a.addr);
  cfg.container = a.container;
  cfg.quality = a.quality;
  StreamServer server(cfg);
  const int port = server.bind();
  out << "serving " << a.container << " on http://" << cfg.host << ":" << port << std::endl;
  server.run();
  return kOk;
}

inline int cmd_play(const PlayArgs& a, std::ostream& out) {
  if (a.url.empty() == a.file.empty()) throw InvalidParameter("play needs exactly one of --url or --file");
  std::unique_ptr<SliceSource> source;
  if (!a.file.empty())
    source = std::make_unique<ContainerSource>(a.file, a.quality);
  else
    source = std::make_unique<HttpSource>(a.url, a.quality);
  const Manifest m = source->manifest();
  PlayerOptions opt;
  opt.fps = a.fps ? *a.fps : m.fps;
  opt.queue_depth = a.queue_depth;
  std::unique_ptr<std::ofstream> stats_file;
  std::ostream* stats = nullptr;
  if (a.stats == "-") {
    stats = &out;
  } else if (!a.stats.empty()) {
    stats_file = std::make_unique<std::ofstream>(a.stats);
    if (!*stats_file) throw IoError("cannot write stats to " + a.stats);
    stats = stats_file.get();
  }
  if (!a.out_dir.empty()) std::filesystem::create_directories(a.out_dir);
  PlayerSinks sinks;
  if (!a.out_dir.empty())
    sinks.frame = [dir = a.out_dir](FrameIndex f, const Image<float>& img) { write_png(frame_png(dir, f), img); };
  if (stats) sinks.stats = [stats](const nlohmann::json& j) { *stats << j.dump() << "\n"; };
  const auto sum = play(std::move(source), a.view.path(), opt, sinks);
  if (a.stats != "-")
    out << "played " << sum.frames_rendered << " frames, " << sum.bytes_ingested << " B ingested, " << sum.stalls
        << " stalls\n";
  return kOk;
}

inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<float> pos(-1, 1), sc(0.01f, 0.08f), op(0.05f, 0.95f), col(0, 1);
  std::normal_distribution<float> nq(0, 1);
  std::vector<Gaussian<float>> gs(a.gaussians);
  for (auto& g : gs) {
    g.mean = {pos(rng), pos(rng), pos(rng)};
    g.scale = {sc(rng), sc(rng), sc(rng)};
    g.rotation = Quat<float>{nq(rng), nq(rng), nq(rng), nq(rng)}.normalized();
    g.opacity = op(rng);
    g.color = {col(rng), col(rng), col(rng)};
  }
  const auto cam = look_at<float>(a.size, a.size, a.size * 1.1f, a.size * 1.1f, {0, 0, -4}, {0, 0, 0});
  auto time = [&](auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < a.reps; ++i) fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / a.reps;
  };
  nlohmann::json j{{"gaussians", a.gaussians}, {"image", a.size}, {"reps", a.reps}};
  const double render_s = time([&] { (void)render(cam, std::span<const Gaussian<float>>(gs)); });
  j["render_ms"] = render_s * 1e3;
  for (Profile p : {Profile::kFull, Profile::kQuantized}) {
    std::vector<std::uint8_t> buf;
    const double enc = time([&] {
      buf.clear();
      for (const auto& g : gs) encode_record(g, p, buf);
    });
    const std::size_t rs = record_size(p);
    const double dec = time([&] {
      for (std::size_t i = 0; i < gs.size(); ++i)
        (void)decode_record(std::span<const std::uint8_t>(buf).subspan(i * rs, rs), p);
    });
    const std::string key = "profile" + std::to_string(static_cast<int>(p));
    j[key] = {{"encode_records_per_s", gs.size() / enc}, {"decode_records_per_s", gs.size() / dec}};
  }
  out << j.dump(2) << "\n";
  return kOk;
}

// Entry point. Exit codes: 0 ok, 1 user error, 2 internal error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sliding-window Gaussian splatting: train, stream and play volumetric video", "swings"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Render a synthetic multi-view dataset from animated Gaussians");
  c_synth->add_option("--out", synth.out, "Dataset directory")->required();
  c_synth->add_option("--seed", synth.opt.seed, "Random seed");
  c_synth->add_option("--frames", synth.opt.total_frames, "Frame count")->check(CLI::PositiveNumber);
  c_synth->add_option("--views", synth.opt.n_views, "Camera count")->check(CLI::PositiveNumber);
  c_synth->add_option("--gaussians", synth.opt.n_gaussians, "Ground-truth Gaussian count")->check(CLI::PositiveNumber);
  c_synth->add_option("--width", synth.opt.width, "Image width")->check(CLI::PositiveNumber);
  c_synth->add_option("--height", synth.opt.height, "Image height")->check(CLI::PositiveNumber);
  c_synth->add_option("--focal", synth.opt.focal, "Focal length in pixels")->check(CLI::PositiveNumber);
  c_synth->add_option("--distance", synth.opt.distance, "Camera distance")->check(CLI::PositiveNumber);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a dataset into a stream container");
  c_train->add_option("--data", train.data, "Dataset directory")->required();
  c_train->add_option("--out", train.out, "Output container")->required();
  c_train->add_option("--config", train.config, "JSON config with TrainConfig field names");
  c_train->add_option("--num-gs", train.num_gs, "Gaussians per frame");
  c_train->add_option("--swin", train.swin, "Sliding window size in frames");
  c_train->add_option("--genesis-iters", train.genesis_iters, "Iterations of the first window");
  c_train->add_option("--window-iters", train.window_iters, "Iterations of every later window");
  c_train->add_option("--profile", train.profile, "Record profile: 0 full, 1 quantized");
  c_train->add_option("--seed", train.seed, "Random seed");
  c_train->add_option("--holdout", train.holdout, "Views excluded from training");
  c_train->add_flag("--quiet", train.quiet, "No per-window log");

  InspectArgs inspect;
  auto* c_inspect = app.add_subcommand("inspect", "Audit a container: counts, bytes and bandwidth");
  c_inspect->add_option("container", inspect.container, "Container file")->required();
  c_inspect->add_option("--fps", inspect.fps, "Frame rate for the bandwidth figure (default: manifest)");
  c_inspect->add_flag("--json", inspect.json, "Machine-readable output");
  c_inspect->add_option("--render-all", inspect.render_all, "Render every frame offline into this directory");
  inspect.view.add(c_inspect);

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Serve a container over HTTP");
  c_serve->add_option("--container", serve.container, "Container file")->required();
  c_serve->add_option("--addr", serve.addr, "host:port to bind");
  c_serve->add_option("--quality", serve.quality, "Default quality fraction in (0,1]");

  PlayArgs playa;
  auto* c_play = app.add_subcommand("play", "Play a stream headlessly");
  c_play->add_option("--url", playa.url, "Server base URL");
  c_play->add_option("--file", playa.file, "Container file");
  c_play->add_option("--out-dir", playa.out_dir, "Write each frame as a PNG here");
  c_play->add_option("--fps", playa.fps, "Playback rate; 0 plays as fast as slices arrive (default: manifest)");
  c_play->add_option("--quality", playa.quality, "Quality fraction in (0,1]");
  c_play->add_option("--stats", playa.stats, "Line-delimited JSON stats file, or - for stdout");
  c_play->add_option("--queue-depth", playa.queue_depth, "Prefetched slices (default: swin_size)");
  playa.view.add(c_play);

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Time rendering and record coding");
  c_bench->add_option("--gaussians", bench.gaussians, "Gaussian count")->check(CLI::PositiveNumber);
  c_bench->add_option("--size", bench.size, "Square image size")->check(CLI::PositiveNumber);
  c_bench->add_option("--reps", bench.reps, "Repetitions")->check(CLI::PositiveNumber);
  c_bench->add_option("--seed", bench.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "swings: usage error: " << e.what() << "\n";
    return kUserError;
  }

  try {
    if (c_synth->parsed()) return cmd_synth(synth, out);
    if (c_train->parsed()) return cmd_train(train, out, err);
    if (c_inspect->parsed()) return cmd_inspect(inspect, out);
    if (c_serve->parsed()) return cmd_serve(serve, out);
    if (c_play->parsed()) return cmd_play(playa, out);
    if (c_bench->parsed()) return cmd_bench(bench, out);
  } catch (const InvalidParameter& e) {
    err << "swings: invalid parameter: " << e.what() << "\n";
    return kUserError;
  } catch (const FormatError& e) {
    err << "swings: format error: " << e.what() << "\n";
    return kUserError;
  } catch (const IoError& e) {
    err << "swings: i/o error: " << e.what() << "\n";
    return kUserError;
  } catch (const ProtocolError& e) {
    err << "swings: protocol error: " << e.what() << "\n";
    return kUserError;
  } catch (const std::exception& e) {
    err << "swings: internal error: " << e.what() << "\n";
    return kInternalError;
  }
  err << "swings: internal error: no subcommand ran\n";
  return kInternalError;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"swings"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace swings::cli
