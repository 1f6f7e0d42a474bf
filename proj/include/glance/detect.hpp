#pragma once

// Detections, ground truth, the size strata, the IoU >= 0.3 recoverability
// metric, and the detector port with its oracle and external implementations.

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "glance/errors.hpp"
#include "glance/geometry.hpp"
#include "glance/image.hpp"
#include "glance/image_io.hpp"
#include "glance/mosaic.hpp"
#include "glance/rng.hpp"
#include "glance/roi.hpp"

namespace glance::det {

struct GtBox {
  Box box;
  int cls = 0;
  int id = 0;
};

struct Detection {
  Box box;
  double score = 0;
  int cls = 0;
};

enum class Stratum { Small = 0, Medium = 1, Large = 2 };
inline constexpr std::array<const char*, 3> kStratumNames = {"small", "medium", "large"};

inline const char* stratum_name(Stratum s) noexcept { return kStratumNames[static_cast<int>(s)]; }

// Small: A < 32^2, medium: 32^2 <= A < 96^2, large: A >= 96^2.
inline Stratum size_stratum(double area) {
  if (!(area > 0)) throw DataError("ground-truth box area must be positive");
  if (area < 32.0 * 32.0) return Stratum::Small;
  if (area < 96.0 * 96.0) return Stratum::Medium;
  return Stratum::Large;
}
inline Stratum size_stratum(const Box& b) { return size_stratum(b.area()); }

inline constexpr double kHitIou = 0.3;

inline bool is_hit(const Box& gt, std::span<const Detection> dets, double iou_thresh = kHitIou) {
  for (const auto& d : dets)
    if (iou(d.box, gt) >= iou_thresh) return true;
  return false;
}

// Class-independent recoverability; nullopt when there is no ground truth.
inline std::optional<double> accuracy(std::span<const Detection> dets, std::span<const GtBox> gts,
                                      double iou_thresh = kHitIou) {
  if (gts.empty()) return std::nullopt;
  int hits = 0;
  for (const auto& g : gts) hits += is_hit(g.box, dets, iou_thresh) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gts.size());
}

// Everything a detector may look at for one frame.
struct DetectRequest {
  int frame = 0;
  const GrayImage* canvas = nullptr;  // may be null when pixels are not rendered
  int canvas_width = 0;
  int canvas_height = 0;
  const std::vector<mosaic::Placement>* placements = nullptr;
  const roi::RegionMask* mask = nullptr;  // frame-space mask behind the mosaic
  std::span<const GtBox> ground_truth;    // oracle only
};

class DetectorPort {
 public:
  virtual ~DetectorPort() = default;
  // Scored boxes in canvas coordinates.
  virtual std::vector<Detection> detect(const DetectRequest& req) = 0;
  virtual bool needs_pixels() const { return false; }
};

struct OracleConfig {
  double vis_thresh = 0.5;
  double jitter = 0.0;  // std-dev of box-edge noise as a fraction of box size
  std::uint64_t seed = 0;

  void validate() const {
    if (!(vis_thresh > 0 && vis_thresh <= 1)) throw ConfigError("detector.vis_thresh must be in (0, 1]");
    if (!(jitter >= 0)) throw ConfigError("detector.jitter must be non-negative");
  }
};

inline double exact_intersection(const Box& b, const roi::RegionMask& mask) {
  double a = 0;
  for (const auto& r : mask.rects()) a += intersect(b, to_box(r)).area();
  return a;
}

// Ground-truth stand-in: a GT whose visible fraction reaches vis_thresh is
// reported once per placement it appears in, as the bounding box of its
// visible part there, scored by the overall visible fraction.
inline std::vector<Detection> oracle_detect(const std::vector<mosaic::Placement>& placements,
                                            const roi::RegionMask& mask, std::span<const GtBox> gts,
                                            const OracleConfig& cfg, int frame = 0) {
  cfg.validate();
  std::vector<Detection> out;
  const CounterRng rng(cfg.seed, 0xD0000000ULL + static_cast<std::uint64_t>(frame));
  for (const auto& g : gts) {
    const double area = g.box.area();
    if (!(area > 0)) continue;
    const double vis = exact_intersection(g.box, mask) / area;
    if (vis < cfg.vis_thresh) continue;
    for (const auto& p : placements) {
      std::optional<Box> piece;
      for (const auto& r : mask.rects()) {
        const IRect part = intersect(r, p.src);
        if (part.empty()) continue;
        const Box b = intersect(g.box, to_box(part));
        if (b.area() <= 0) continue;
        piece = piece ? bounding(*piece, b) : b;
      }
      if (!piece) continue;
      Box c{piece->x - p.src.x + p.dst.x, piece->y - p.src.y + p.dst.y, piece->w, piece->h};
      if (cfg.jitter > 0) {
        const auto k = static_cast<std::uint64_t>(g.id) * 4;
        c.x += cfg.jitter * c.w * rng.normal(k);
        c.y += cfg.jitter * c.h * rng.normal(k + 1);
        c.w *= std::max(0.1, 1.0 + cfg.jitter * rng.normal(k + 2));
        c.h *= std::max(0.1, 1.0 + cfg.jitter * rng.normal(k + 3));
        c = intersect(c, to_box(p.dst));
        if (c.area() <= 0) continue;
      }
      out.push_back({c, vis, g.cls});
    }
  }
  return out;
}

class OracleDetector final : public DetectorPort {
 public:
  explicit OracleDetector(OracleConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  std::vector<Detection> detect(const DetectRequest& req) override {
    if (!req.placements || !req.mask) throw DataError("oracle detector needs placements and the mask");
    return oracle_detect(*req.placements, *req.mask, req.ground_truth, cfg_, req.frame);
  }

 private:
  OracleConfig cfg_;
};

inline nlohmann::json detections_to_json(std::span<const Detection> dets) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : dets) arr.push_back({{"box", {d.box.x, d.box.y, d.box.w, d.box.h}}, {"score", d.score}, {"class", d.cls}});
  return arr;
}

// Parses `[{box:[x,y,w,h], score, class}, ...]`.
inline std::vector<Detection> detections_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw DataError(where + ": detection response must be a JSON list");
  std::vector<Detection> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::string at = where + ": detection " + std::to_string(i);
    if (!e.is_object() || !e.contains("box")) throw DataError(at + ": missing box");
    const auto& b = e["box"];
    if (!b.is_array() || b.size() != 4) throw DataError(at + ": box must be [x,y,w,h]");
    Detection d;
    for (const auto& v : b)
      if (!v.is_number()) throw DataError(at + ": box entries must be numbers");
    d.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    if (e.contains("score")) {
      if (!e["score"].is_number()) throw DataError(at + ": score must be a number");
      d.score = e["score"].get<double>();
    }
    if (e.contains("class")) {
      if (!e["class"].is_number_integer()) throw DataError(at + ": class must be an integer");
      d.cls = e["class"].get<int>();
    }
    out.push_back(d);
  }
  return out;
}

struct ExternalConfig {
  std::string command;  // invoked as: command <canvas.png> <placements.json> <out.json>
  std::filesystem::path workdir = "detector_work";
  double timeout_s = 10.0;
};

// Runs `argv` and waits up to timeout seconds; returns the exit status or
// throws on timeout (the child is killed).
inline int run_with_timeout(const std::vector<std::string>& argv, double timeout_s) {
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  const pid_t pid = fork();
  if (pid < 0) throw DataError("fork failed");
  if (pid == 0) {
    setpgid(0, 0);  // own process group, so a timeout also kills its children
    execvp(args[0], args.data());
    _exit(127);
  }
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  int status = 0;
  for (;;) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) throw DataError("waitpid failed");
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      throw DataError("external detector timed out after " + std::to_string(timeout_s) + " s");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

// File-based protocol: the mosaic PNG and the placement sidecar go to the
// work directory; the command writes its detections as JSON.
class ExternalDetector final : public DetectorPort {
 public:
  explicit ExternalDetector(ExternalConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.command.empty()) throw ConfigError("detector.command must be set for the external detector");
    if (!(cfg_.timeout_s > 0)) throw ConfigError("detector.timeout_s must be positive");
  }

  bool needs_pixels() const override { return true; }

  std::vector<Detection> detect(const DetectRequest& req) override {
    if (!req.canvas || !req.placements) throw DataError("external detector needs the canvas and placements");
    std::filesystem::create_directories(cfg_.workdir);
    char stem[32];
    std::snprintf(stem, sizeof stem, "frame_%06d", req.frame);
    const auto png = cfg_.workdir / (std::string(stem) + ".png");
    const auto side = cfg_.workdir / (std::string(stem) + ".json");
    const auto out = cfg_.workdir / (std::string(stem) + ".det.json");
    write_png(png, *req.canvas);
    {
      std::ofstream f(side);
      f << nlohmann::json{{"frame", req.frame},
                          {"canvas", {req.canvas->width, req.canvas->height}},
                          {"placements", mosaic::placements_to_json(*req.placements)}}
               .dump();
    }
    std::filesystem::remove(out);
    const std::string where = "frame " + std::to_string(req.frame);
    const int rc = run_with_timeout({"/bin/sh", "-c", cfg_.command + " \"$0\" \"$1\" \"$2\"", png.string(),
                                     side.string(), out.string()},
                                    cfg_.timeout_s);
    if (rc != 0) throw DataError(where + ": external detector exited with status " + std::to_string(rc));
    std::ifstream in(out);
    if (!in) throw DataError(where + ": external detector wrote no " + out.filename().string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": malformed detector JSON: " + e.what());
    }
    return detections_from_json(j, where);
  }

 private:
  ExternalConfig cfg_;
};

}  // namespace glance::det
