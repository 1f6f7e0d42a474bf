#pragma once

// Simulator configuration: one JSON document with camera, scene, gaze, roi,
// policy, stabilization, detector, cost and sweep blocks. Every block and
// field is optional; schema errors name the offending field path.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glance/attention.hpp"
#include "glance/detect.hpp"
#include "glance/errors.hpp"
#include "glance/roi.hpp"
#include "glance/scene.hpp"
#include "glance/stabilization.hpp"

namespace glance::sim {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct CameraConfig {
  int width = 640;
  int height = 640;
  double fov_h_deg = 90.0;
  double fps = 30.0;

  roi::CameraIntrinsics intrinsics() const { return roi::CameraIntrinsics::centered(width, height, fov_h_deg); }
  double dt() const { return 1.0 / fps; }
};

struct RoiConfig {
  double theta_max_deg = 8.3;
  double hit_probability = 0.5;
  std::vector<int> sides{48, 64, 80};
  int side = 0;           // nonzero overrides S(p) snapping
  int count = 1;          // N proposals per frame
  double sigma_px = -1;   // negative: e/2
  double nms_iou = 0.5;
};

enum class ImuSource { Static, Synthetic, Csv };

struct StabConfig {
  bool enabled = false;
  ImuSource imu = ImuSource::Static;
  stab::SyntheticImuConfig synthetic;
  std::filesystem::path imu_path;
  double z_min = 0.5;
  double alpha_max = 0.2;
  stab::TimeoutLaw timeout;
  double world_step_deg = 1.0;
};

enum class DetectorKind { Oracle, External };

struct DetectorConfig {
  DetectorKind kind = DetectorKind::Oracle;
  det::OracleConfig oracle;
  det::ExternalConfig external;
};

struct CostConfig {
  double bytes_per_pixel = 1.0;
  double metadata_bytes_per_roi = 16.0;
};

struct SweepConfig {
  std::vector<int> sides{48, 64, 80};
  std::vector<int> counts{1, 2, 3, 4, 5, 10, 15, 20, 25, 30, 40, 50};
  int threads = 0;  // 0: hardware concurrency
};

struct SimConfig {
  std::uint64_t seed = 0;
  int frames = 60;
  CameraConfig camera;
  SceneConfig scene;
  std::filesystem::path coco;  // optional annotations replacing the synthetic scene
  GazeSourceConfig gaze;
  RoiConfig roi;
  attention::PolicyConfig policy;
  StabConfig stabilization;
  DetectorConfig detector;
  CostConfig cost;
  SweepConfig sweep;
};

namespace detail {

class Block {
 public:
  Block(const json& j, std::string path, std::set<std::string> known) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    for (const auto& [k, v] : j_.items())
      if (!known.count(k)) throw ConfigError("unknown field " + field(k));
  }

  std::string where() const { return path_.empty() ? "config" : path_; }
  std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }
  const json& at(const std::string& k) const { return j_.at(k); }

  void num(const std::string& k, double& out) const {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if (!v.is_number()) throw ConfigError(field(k) + ": expected a number");
    out = v.get<double>();
  }
  // Numbers, or null / "inf" for +infinity.
  void num_or_inf(const std::string& k, double& out) const {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "inf")) {
      out = std::numeric_limits<double>::infinity();
      return;
    }
    num(k, out);
  }
  void integer(const std::string& k, int& out) const {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if (!v.is_number_integer()) throw ConfigError(field(k) + ": expected an integer");
    out = v.get<int>();
  }
  void int_or_inf(const std::string& k, int& out, int inf) const {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "inf")) {
      out = inf;
      return;
    }
    integer(k, out);
  }
  void u64(const std::string& k, std::uint64_t& out) const {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError(field(k) + ": expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  void boolean(const std::string& k, bool& out) const {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if (!v.is_boolean()) throw ConfigError(field(k) + ": expected true or false");
    out = v.get<bool>();
  }
  void string(const std::string& k, std::string& out) const {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if (!v.is_string()) throw ConfigError(field(k) + ": expected a string");
    out = v.get<std::string>();
  }
  void path(const std::string& k, std::filesystem::path& out, const std::filesystem::path& base) const {
    std::string s;
    string(k, s);
    if (!s.empty()) out = std::filesystem::path(s).is_absolute() ? std::filesystem::path(s) : base / s;
  }
  void int_list(const std::string& k, std::vector<int>& out) const {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if (!v.is_array() || v.empty()) throw ConfigError(field(k) + ": expected a nonempty list of integers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) throw ConfigError(field(k) + "[" + std::to_string(i) + "]: expected an integer");
      out.push_back(v[i].get<int>());
    }
  }
  Block child(const std::string& k, std::set<std::string> known) const {
    return Block(j_.at(k), field(k), std::move(known));
  }

 private:
  const json& j_;
  std::string path_;
};

inline void require(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ConfigError(field + ": " + msg);
}

}  // namespace detail

// `base` resolves relative paths in the document.
inline SimConfig sim_config_from_json(const json& j, const std::filesystem::path& base = {}) {
  using detail::Block;
  using detail::require;
  SimConfig c;
  const Block top(j, "",
                  {"seed", "frames", "camera", "scene", "coco", "gaze", "roi", "policy", "stabilization", "detector",
                   "cost", "sweep"});
  top.u64("seed", c.seed);
  top.integer("frames", c.frames);
  require(c.frames >= 1, "frames", "must be >= 1");
  top.path("coco", c.coco, base);

  if (top.has("camera")) {
    const Block b = top.child("camera", {"width", "height", "fov_h_deg", "fps"});
    b.integer("width", c.camera.width);
    b.integer("height", c.camera.height);
    b.num("fov_h_deg", c.camera.fov_h_deg);
    b.num("fps", c.camera.fps);
  }
  require(c.camera.width > 0 && c.camera.height > 0, "camera", "width and height must be positive");
  require(c.camera.fov_h_deg > 0 && c.camera.fov_h_deg < 180, "camera.fov_h_deg", "must be in (0, 180)");
  require(c.camera.fps > 0, "camera.fps", "must be positive");

  if (top.has("scene")) {
    const Block b = top.child("scene", {"small", "medium", "large", "motion_px", "classes", "max_large_side"});
    b.integer("small", c.scene.objects[0]);
    b.integer("medium", c.scene.objects[1]);
    b.integer("large", c.scene.objects[2]);
    b.num("motion_px", c.scene.motion_px);
    b.integer("classes", c.scene.classes);
    b.num("max_large_side", c.scene.max_large_side);
    for (int s = 0; s < 3; ++s) require(c.scene.objects[s] >= 0, "scene", "object counts must be non-negative");
    require(c.scene.motion_px >= 0, "scene.motion_px", "must be non-negative");
    require(c.scene.classes >= 1, "scene.classes", "must be >= 1");
    require(c.scene.max_large_side >= 96, "scene.max_large_side", "must be >= 96");
  }

  if (top.has("gaze")) {
    const Block b = top.child("gaze", {"source", "noise_deg", "dwell", "path", "model", "eye_pixel_noise"});
    std::string src = "seeded";
    b.string("source", src);
    if (src == "seeded") c.gaze.kind = GazeKind::Seeded;
    else if (src == "recorded") c.gaze.kind = GazeKind::Recorded;
    else if (src == "model") c.gaze.kind = GazeKind::Model;
    else throw ConfigError("gaze.source: expected seeded, recorded or model");
    b.num("noise_deg", c.gaze.noise_deg);
    b.integer("dwell", c.gaze.dwell);
    b.num("eye_pixel_noise", c.gaze.eye_pixel_noise);
    b.path(c.gaze.kind == GazeKind::Model ? "model" : "path", c.gaze.path, base);
    require(c.gaze.noise_deg >= 0, "gaze.noise_deg", "must be non-negative");
    require(c.gaze.dwell >= 1, "gaze.dwell", "must be >= 1");
    if (c.gaze.kind == GazeKind::Recorded) require(!c.gaze.path.empty(), "gaze.path", "required for recorded gaze");
    if (c.gaze.kind == GazeKind::Model) require(!c.gaze.path.empty(), "gaze.model", "required for model gaze");
  }

  if (top.has("roi")) {
    const Block b = top.child("roi", {"theta_max_deg", "hit_probability", "sides", "side", "count", "sigma_px", "nms_iou"});
    b.num("theta_max_deg", c.roi.theta_max_deg);
    b.num("hit_probability", c.roi.hit_probability);
    b.int_list("sides", c.roi.sides);
    b.integer("side", c.roi.side);
    b.integer("count", c.roi.count);
    b.num("sigma_px", c.roi.sigma_px);
    b.num("nms_iou", c.roi.nms_iou);
  }
  require(c.roi.theta_max_deg > 0 && c.roi.theta_max_deg < c.camera.fov_h_deg / 2, "roi.theta_max_deg",
          "must be in (0, FOV/2)");
  require(c.roi.hit_probability >= 0 && c.roi.hit_probability <= 1, "roi.hit_probability", "must be in [0, 1]");
  for (int s : c.roi.sides) require(s > 0, "roi.sides", "sides must be positive");
  require(c.roi.side >= 0, "roi.side", "must be >= 0");
  require(c.roi.count >= 1, "roi.count", "must be >= 1");
  require(c.roi.nms_iou >= 0 && c.roi.nms_iou <= 1, "roi.nms_iou", "must be in [0, 1]");

  if (top.has("policy")) {
    const Block b = top.child("policy", {"lambda", "lambda_post", "w_min", "K", "R", "B"});
    b.num("lambda", c.policy.lambda);
    b.num("lambda_post", c.policy.lambda_post);
    b.num("w_min", c.policy.w_min);
    b.int_or_inf("K", c.policy.window, attention::kUnboundedWindow);
    b.integer("R", c.policy.period);
    b.num_or_inf("B", c.policy.budget);
  }
  c.policy.validate();

  if (top.has("stabilization")) {
    const Block b = top.child("stabilization", {"enabled", "imu", "z_min", "alpha_max", "t_max", "beta", "world_step_deg"});
    b.boolean("enabled", c.stabilization.enabled);
    b.num("z_min", c.stabilization.z_min);
    b.num("alpha_max", c.stabilization.alpha_max);
    b.num("t_max", c.stabilization.timeout.t_max);
    b.num("beta", c.stabilization.timeout.beta);
    b.num("world_step_deg", c.stabilization.world_step_deg);
    if (b.has("imu")) {
      const Block m = b.child("imu", {"source", "path", "yaw_amp_deg", "yaw_period_s", "pitch_amp_deg",
                                      "pitch_period_s", "accel_amp", "accel_period_s", "noise_deg"});
      std::string src = "static";
      m.string("source", src);
      if (src == "static") c.stabilization.imu = ImuSource::Static;
      else if (src == "synthetic") c.stabilization.imu = ImuSource::Synthetic;
      else if (src == "csv") c.stabilization.imu = ImuSource::Csv;
      else throw ConfigError("stabilization.imu.source: expected static, synthetic or csv");
      m.path("path", c.stabilization.imu_path, base);
      auto& s = c.stabilization.synthetic;
      m.num("yaw_amp_deg", s.yaw_amp_deg);
      m.num("yaw_period_s", s.yaw_period_s);
      m.num("pitch_amp_deg", s.pitch_amp_deg);
      m.num("pitch_period_s", s.pitch_period_s);
      m.num("accel_amp", s.accel_amp);
      m.num("accel_period_s", s.accel_period_s);
      m.num("noise_deg", s.noise_deg);
      require(s.yaw_period_s > 0 && s.pitch_period_s > 0 && s.accel_period_s > 0, "stabilization.imu",
              "periods must be positive");
      if (c.stabilization.imu == ImuSource::Csv)
        require(!c.stabilization.imu_path.empty(), "stabilization.imu.path", "required for csv source");
    }
    require(c.stabilization.z_min > 0, "stabilization.z_min", "must be positive");
    require(c.stabilization.alpha_max >= 0, "stabilization.alpha_max", "must be non-negative");
    require(c.stabilization.timeout.t_max > 0, "stabilization.t_max", "must be positive");
    require(c.stabilization.timeout.beta >= 0, "stabilization.beta", "must be non-negative");
    require(c.stabilization.world_step_deg > 0 && c.stabilization.world_step_deg <= 90,
            "stabilization.world_step_deg", "must be in (0, 90]");
  }

  if (top.has("detector")) {
    const Block b = top.child("detector", {"type", "vis_thresh", "jitter", "command", "workdir", "timeout_s"});
    std::string type = "oracle";
    b.string("type", type);
    if (type == "oracle") c.detector.kind = DetectorKind::Oracle;
    else if (type == "external") c.detector.kind = DetectorKind::External;
    else throw ConfigError("detector.type: expected oracle or external");
    b.num("vis_thresh", c.detector.oracle.vis_thresh);
    b.num("jitter", c.detector.oracle.jitter);
    b.string("command", c.detector.external.command);
    b.path("workdir", c.detector.external.workdir, base);
    b.num("timeout_s", c.detector.external.timeout_s);
    require(c.detector.oracle.vis_thresh > 0 && c.detector.oracle.vis_thresh <= 1, "detector.vis_thresh",
            "must be in (0, 1]");
    require(c.detector.oracle.jitter >= 0, "detector.jitter", "must be non-negative");
    require(c.detector.external.timeout_s > 0, "detector.timeout_s", "must be positive");
    if (c.detector.kind == DetectorKind::External)
      require(!c.detector.external.command.empty(), "detector.command", "required for the external detector");
  }

  if (top.has("cost")) {
    const Block b = top.child("cost", {"bytes_per_pixel", "metadata_bytes_per_roi"});
    b.num("bytes_per_pixel", c.cost.bytes_per_pixel);
    b.num("metadata_bytes_per_roi", c.cost.metadata_bytes_per_roi);
    require(c.cost.bytes_per_pixel > 0, "cost.bytes_per_pixel", "must be positive");
    require(c.cost.metadata_bytes_per_roi >= 0, "cost.metadata_bytes_per_roi", "must be non-negative");
  }

  if (top.has("sweep")) {
    const Block b = top.child("sweep", {"sides", "counts", "threads"});
    b.int_list("sides", c.sweep.sides);
    b.int_list("counts", c.sweep.counts);
    b.integer("threads", c.sweep.threads);
    for (int s : c.sweep.sides) require(s > 0, "sweep.sides", "sides must be positive");
    for (int n : c.sweep.counts) require(n >= 1, "sweep.counts", "counts must be >= 1");
    require(c.sweep.threads >= 0, "sweep.threads", "must be >= 0");
  }
  c.detector.oracle.seed = c.seed;
  c.stabilization.synthetic.seed = c.seed;
  return c;
}

inline SimConfig load_sim_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return sim_config_from_json(j, path.parent_path());
}

inline ordered_json inf_or(double v) {
  return std::isinf(v) ? ordered_json(nullptr) : ordered_json(v);
}

// Canonical echo of the effective configuration (paths as given).
inline ordered_json sim_config_to_json(const SimConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["frames"] = c.frames;
  j["camera"] = {{"width", c.camera.width}, {"height", c.camera.height}, {"fov_h_deg", c.camera.fov_h_deg},
                 {"fps", c.camera.fps}};
  j["scene"] = {{"small", c.scene.objects[0]}, {"medium", c.scene.objects[1]}, {"large", c.scene.objects[2]},
                {"motion_px", c.scene.motion_px}, {"classes", c.scene.classes},
                {"max_large_side", c.scene.max_large_side}};
  if (!c.coco.empty()) j["coco"] = c.coco.string();
  static constexpr const char* kinds[] = {"seeded", "recorded", "model"};
  j["gaze"] = {{"source", kinds[static_cast<int>(c.gaze.kind)]}, {"noise_deg", c.gaze.noise_deg},
               {"dwell", c.gaze.dwell}, {"eye_pixel_noise", c.gaze.eye_pixel_noise}};
  if (!c.gaze.path.empty()) j["gaze"][c.gaze.kind == GazeKind::Model ? "model" : "path"] = c.gaze.path.string();
  j["roi"] = {{"theta_max_deg", c.roi.theta_max_deg}, {"hit_probability", c.roi.hit_probability},
              {"sides", c.roi.sides}, {"side", c.roi.side}, {"count", c.roi.count},
              {"sigma_px", c.roi.sigma_px}, {"nms_iou", c.roi.nms_iou}};
  j["policy"] = {{"lambda", c.policy.lambda},
                 {"lambda_post", c.policy.lambda_post},
                 {"w_min", c.policy.w_min},
                 {"K", c.policy.window == attention::kUnboundedWindow ? ordered_json(nullptr) : ordered_json(c.policy.window)},
                 {"R", c.policy.period},
                 {"B", inf_or(c.policy.budget)}};
  static constexpr const char* imus[] = {"static", "synthetic", "csv"};
  const auto& s = c.stabilization;
  ordered_json imu = {{"source", imus[static_cast<int>(s.imu)]}};
  if (s.imu == ImuSource::Synthetic)
    imu.update(ordered_json{{"yaw_amp_deg", s.synthetic.yaw_amp_deg},
                            {"yaw_period_s", s.synthetic.yaw_period_s},
                            {"pitch_amp_deg", s.synthetic.pitch_amp_deg},
                            {"pitch_period_s", s.synthetic.pitch_period_s},
                            {"accel_amp", s.synthetic.accel_amp},
                            {"accel_period_s", s.synthetic.accel_period_s},
                            {"noise_deg", s.synthetic.noise_deg}});
  if (s.imu == ImuSource::Csv) imu["path"] = s.imu_path.string();
  j["stabilization"] = {{"enabled", s.enabled},       {"imu", imu},
                        {"z_min", s.z_min},           {"alpha_max", s.alpha_max},
                        {"t_max", s.timeout.t_max},   {"beta", s.timeout.beta},
                        {"world_step_deg", s.world_step_deg}};
  if (c.detector.kind == DetectorKind::Oracle)
    j["detector"] = {{"type", "oracle"}, {"vis_thresh", c.detector.oracle.vis_thresh}, {"jitter", c.detector.oracle.jitter}};
  else
    j["detector"] = {{"type", "external"},
                     {"command", c.detector.external.command},
                     {"workdir", c.detector.external.workdir.string()},
                     {"timeout_s", c.detector.external.timeout_s}};
  j["cost"] = {{"bytes_per_pixel", c.cost.bytes_per_pixel}, {"metadata_bytes_per_roi", c.cost.metadata_bytes_per_roi}};
  j["sweep"] = {{"sides", c.sweep.sides}, {"counts", c.sweep.counts}};
  return j;
}

}  // namespace glance::sim
