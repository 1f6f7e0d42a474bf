#pragma once

// Synthetic frame sequences (seeded boxes per size stratum with optional
// motion), COCO-style annotation ingestion, and gaze sources.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glance/detect.hpp"
#include "glance/dwn.hpp"
#include "glance/errors.hpp"
#include "glance/gaze_data.hpp"
#include "glance/image.hpp"
#include "glance/model_io.hpp"
#include "glance/rng.hpp"
#include "glance/roi.hpp"
#include "glance/stabilization.hpp"

namespace glance::sim {

struct FrameRecord {
  int t = 0;
  std::vector<det::GtBox> gt;
  stab::PoseSample pose;
};

struct SceneConfig {
  std::array<int, 3> objects{3, 3, 2};  // per stratum: small, medium, large
  double motion_px = 1.5;               // max per-frame speed on each axis
  int classes = 3;
  double max_large_side = 200;
};

struct SceneObject {
  double u = 0, v = 0;    // center at the reference pose
  double w = 0, h = 0;
  double vu = 0, vv = 0;  // pixels per frame
  int cls = 0;
  int id = 0;
};

namespace detail {

inline double reflect(double x, double lo, double hi) {
  if (hi <= lo) return lo;
  const double span = hi - lo;
  double y = std::fmod(x - lo, 2 * span);
  if (y < 0) y += 2 * span;
  return lo + (y <= span ? y : 2 * span - y);
}

}  // namespace detail

// Sizes drawn log-uniformly inside each stratum's area range, aspect ratio in
// [0.5, 2]; rounded sizes that leave the stratum are redrawn.
inline std::vector<SceneObject> make_objects(const SceneConfig& c, const roi::CameraIntrinsics& intr,
                                             std::uint64_t seed) {
  const CounterRng rng(seed, 0x5CE);
  const double lo_area[3] = {12.0 * 12.0, 32.0 * 32.0, 96.0 * 96.0};
  const double hi_area[3] = {32.0 * 32.0, 96.0 * 96.0, c.max_large_side * c.max_large_side};
  std::vector<SceneObject> out;
  std::uint64_t k = 0;
  int id = 0;
  for (int s = 0; s < 3; ++s) {
    if (c.objects[s] < 0) throw ConfigError("scene.objects counts must be non-negative");
    for (int i = 0; i < c.objects[s]; ++i) {
      SceneObject o;
      for (int attempt = 0;; ++attempt, k += 8) {
        if (attempt > 1000) throw ConfigError("cannot draw scene objects for this frame size");
        const double area = std::exp(rng.uniform(k, std::log(lo_area[s]), std::log(hi_area[s])));
        const double aspect = std::exp(rng.uniform(k + 1, std::log(0.5), std::log(2.0)));
        o.w = std::round(std::sqrt(area * aspect));
        o.h = std::round(std::sqrt(area / aspect));
        if (o.w < 1 || o.h < 1 || o.w > intr.width || o.h > intr.height) continue;
        if (static_cast<int>(det::size_stratum(o.w * o.h)) != s) continue;
        o.u = rng.uniform(k + 2, o.w / 2, intr.width - o.w / 2);
        o.v = rng.uniform(k + 3, o.h / 2, intr.height - o.h / 2);
        o.vu = rng.uniform(k + 4, -c.motion_px, c.motion_px);
        o.vv = rng.uniform(k + 5, -c.motion_px, c.motion_px);
        o.cls = static_cast<int>(rng.below(k + 6, static_cast<std::uint64_t>(std::max(1, c.classes))));
        k += 8;
        break;
      }
      o.id = id++;
      out.push_back(o);
    }
  }
  return out;
}

// Frames: objects move and bounce at the reference pose, then the camera's
// rotation relocates them through the world mapping. Boxes are clipped to the
// frame and snapped to whole pixels; fully hidden objects are omitted.
inline std::vector<FrameRecord> make_scene(const SceneConfig& c, const roi::CameraIntrinsics& intr,
                                           const std::vector<stab::PoseSample>& poses, std::uint64_t seed) {
  const auto objects = make_objects(c, intr, seed);
  const stab::PoseSample ref = poses.empty() ? stab::PoseSample{} : poses.front();
  std::vector<FrameRecord> frames;
  frames.reserve(poses.size());
  for (std::size_t t = 0; t < poses.size(); ++t) {
    FrameRecord fr{static_cast<int>(t), {}, poses[t]};
    for (const auto& o : objects) {
      const double u = detail::reflect(o.u + o.vu * t, o.w / 2, intr.width - o.w / 2);
      const double v = detail::reflect(o.v + o.vv * t, o.h / 2, intr.height - o.h / 2);
      const auto world = stab::to_world(u, v, ref, intr);
      const auto pix = stab::from_world(world, poses[t], intr);
      if (!pix) continue;
      const Box raw{std::round(pix->first - o.w / 2), std::round(pix->second - o.h / 2), o.w, o.h};
      const Box vis = intersect(raw, to_box(intr.frame()));
      if (vis.area() <= 0) continue;
      fr.gt.push_back({vis, o.cls, o.id});
    }
    frames.push_back(std::move(fr));
  }
  return frames;
}

// Gray background with a soft gradient and class-shaded object rectangles.
inline GrayImage render_frame(const FrameRecord& fr, const roi::CameraIntrinsics& intr, std::uint64_t seed) {
  GrayImage img(intr.width, intr.height);
  const CounterRng rng(seed, 0xF000000ULL + static_cast<std::uint64_t>(fr.t));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double base = 90 + 40.0 * x / std::max(1, img.width) + 20.0 * y / std::max(1, img.height);
      const double n = 6 * (rng.uniform(static_cast<std::uint64_t>(y) * img.width + x) - 0.5);
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(base + n, 0.0, 255.0));
    }
  for (const auto& g : fr.gt) {
    const auto shade = static_cast<std::uint8_t>(20 + (g.cls * 67) % 200);
    const int x0 = static_cast<int>(g.box.x), y0 = static_cast<int>(g.box.y);
    for (int y = y0; y < static_cast<int>(g.box.y1()); ++y)
      for (int x = x0; x < static_cast<int>(g.box.x1()); ++x) img.at(x, y) = shade;
  }
  return img;
}

// Minimal COCO subset: images[{id,width,height,file_name}] and
// annotations[{image_id,bbox,category_id,area}]. One frame per image, in
// file order; poses are left at identity.
inline std::vector<FrameRecord> load_coco(const std::filesystem::path& path, const roi::CameraIntrinsics& intr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!j.contains("images") || !j["images"].is_array()) throw DataError(path.string() + ": missing images list");
  std::map<long long, std::size_t> index;
  std::vector<FrameRecord> frames;
  for (const auto& im : j["images"]) {
    const long long id = im.at("id").get<long long>();
    index[id] = frames.size();
    FrameRecord fr;
    fr.t = static_cast<int>(frames.size());
    fr.pose.t = fr.t;
    frames.push_back(fr);
  }
  int n = 0;
  for (const auto& a : j.value("annotations", nlohmann::json::array())) {
    const std::string where = path.string() + ": annotation " + std::to_string(n++);
    const auto it = index.find(a.at("image_id").get<long long>());
    if (it == index.end()) throw DataError(where + ": unknown image_id");
    const auto& b = a.at("bbox");
    if (!b.is_array() || b.size() != 4) throw DataError(where + ": bbox must be [x,y,w,h]");
    const Box box = intersect(Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
                              to_box(intr.frame()));
    if (box.area() <= 0) continue;
    auto& fr = frames[it->second];
    fr.gt.push_back({box, a.value("category_id", 0), static_cast<int>(fr.gt.size())});
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Gaze sources

enum class GazeKind { Seeded, Recorded, Model };

struct GazeSourceConfig {
  GazeKind kind = GazeKind::Seeded;
  double noise_deg = 3.0;  // seeded: angular error std-dev per axis
  int dwell = 10;          // seeded: frames before switching target object
  std::filesystem::path path;   // recorded: CSV t,gx,gy,gz; model: .dwn file
  double eye_pixel_noise = 0.05;  // model: eye-crop rendering noise
};

// Direction through a pixel, optionally rotated by small yaw/pitch offsets.
inline dwn::Vec3 direction_through(double u, double v, const roi::CameraIntrinsics& intr, double dyaw = 0,
                                   double dpitch = 0) {
  const double f = intr.focal();
  const double ax = std::atan((u - intr.cx) / f) + dyaw;
  const double ay = std::atan((v - intr.cy) / f) + dpitch;
  const double lim = std::numbers::pi / 2 - 1e-6;
  return dwn::normalize_target({std::tan(std::clamp(ax, -lim, lim)), std::tan(std::clamp(ay, -lim, lim)), 1.0});
}

class GazeSource {
 public:
  GazeSource(GazeSourceConfig cfg, roi::CameraIntrinsics intr, std::uint64_t seed)
      : cfg_(std::move(cfg)), intr_(intr), rng_(seed, 0x6A2E) {
    if (cfg_.dwell < 1) throw ConfigError("gaze.dwell must be >= 1");
    if (!(cfg_.noise_deg >= 0)) throw ConfigError("gaze.noise_deg must be non-negative");
    if (cfg_.kind == GazeKind::Recorded) load_recorded();
    if (cfg_.kind == GazeKind::Model) {
      if (cfg_.path.empty()) throw ConfigError("gaze.model must name a .dwn file");
      interp_.emplace(io::import_quantized(io::read_file_bytes(cfg_.path)));
    }
  }

  // The point the wearer intends to look at: the center of the current target.
  std::pair<double, double> intended(const FrameRecord& fr) const {
    if (fr.gt.empty()) return {intr_.cx, intr_.cy};
    const auto epoch = static_cast<std::uint64_t>(fr.t / cfg_.dwell);
    const auto pick = rng_.below(epoch, fr.gt.size());
    return {fr.gt[pick].box.cx(), fr.gt[pick].box.cy()};
  }

  dwn::Vec3 gaze(const FrameRecord& fr) const {
    switch (cfg_.kind) {
      case GazeKind::Recorded: {
        const auto it = recorded_.find(fr.t);
        if (it == recorded_.end()) throw DataError("recorded gaze has no entry for frame " + std::to_string(fr.t));
        return it->second;
      }
      case GazeKind::Model: {
        const auto [u, v] = intended(fr);
        const auto truth = direction_through(u, v, intr_);
        const auto eye = render_eye(truth, interp_->config().input_size, 0,
                                    rng_.substream(0xE7E000ULL + static_cast<std::uint64_t>(fr.t)),
                                    cfg_.eye_pixel_noise);
        const auto out = interp_->forward(eye);
        return out.degenerate ? dwn::Vec3{0, 0, 1} : out.gaze;
      }
      case GazeKind::Seeded:
      default: {
        const auto [u, v] = intended(fr);
        const auto k = static_cast<std::uint64_t>(fr.t);
        const double s = roi::deg2rad(cfg_.noise_deg);
        return direction_through(u, v, intr_, s * rng_.normal(1000000 + 2 * k), s * rng_.normal(1000000 + 2 * k + 1));
      }
    }
  }

 private:
  void load_recorded() {
    std::ifstream in(cfg_.path);
    if (!in) throw DataError("cannot open recorded gaze " + cfg_.path.string());
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,gx,gy,gz") throw DataError(cfg_.path.string() + ": expected header t,gx,gy,gz");
    for (int row = 2; std::getline(in, line); ++row) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto c = glance::detail::split_csv_line(line);
      const std::string where = cfg_.path.string() + " row " + std::to_string(row);
      if (c.size() != 4) throw DataError(where + ": expected 4 columns");
      const int t = static_cast<int>(glance::detail::parse_double(c[0], where));
      recorded_[t] = dwn::normalize_target({glance::detail::parse_double(c[1], where),
                                            glance::detail::parse_double(c[2], where),
                                            glance::detail::parse_double(c[3], where)});
    }
  }

  GazeSourceConfig cfg_;
  roi::CameraIntrinsics intr_;
  CounterRng rng_;
  std::map<int, dwn::Vec3> recorded_;
  std::optional<io::QuantizedInterpreter> interp_;
};

}  // namespace glance::sim
