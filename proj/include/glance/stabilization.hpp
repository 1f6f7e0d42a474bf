#pragma once

// Head-rotation realignment (frame-local tan shift, equirectangular world map,
// pose-tagged box cache) and forward-motion ROI inflation.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glance/errors.hpp"
#include "glance/gaze_data.hpp"
#include "glance/geometry.hpp"
#include "glance/rng.hpp"
#include "glance/roi.hpp"

namespace glance::stab {

using roi::CameraIntrinsics;
using roi::deg2rad;
using roi::rad2deg;

struct PoseSample {
  double yaw = 0;    // radians
  double pitch = 0;  // radians
  double a_fwd = 0;  // m/s^2
  double t = 0;      // seconds

  void validate() const {
    if (!(std::abs(yaw) <= std::numbers::pi) || !(std::abs(pitch) <= std::numbers::pi / 2))
      throw DataError("pose out of range: |yaw| <= pi, |pitch| <= pi/2");
  }
};

inline double wrap_angle(double a) noexcept {
  a = std::fmod(a + std::numbers::pi, 2 * std::numbers::pi);
  if (a < 0) a += 2 * std::numbers::pi;
  return a - std::numbers::pi;  // [-pi, pi)
}

enum class ShiftMode { Auto, Exact, SmallAngle };

inline constexpr double kSmallAngleDeg = 2.0;

struct Shift {
  double du = 0;
  double dv = 0;
  bool out_of_frame = false;
};

namespace detail {
inline double tan_term(double d, ShiftMode mode) {
  const bool small = mode == ShiftMode::SmallAngle || (mode == ShiftMode::Auto && std::abs(d) < deg2rad(kSmallAngleDeg));
  return small ? d : std::tan(d);
}
}  // namespace detail

// [u', v'] = [u, v] - f [tan dyaw, tan dpitch]. Flags rotations at or beyond
// the half field of view on either axis.
inline Shift rotation_shift(double dyaw, double dpitch, const CameraIntrinsics& intr, ShiftMode mode = ShiftMode::Auto) {
  const double f = intr.focal();
  const double half_h = deg2rad(intr.fov_h_deg) / 2;
  const double half_v = std::atan(intr.height / (2 * f));
  Shift s;
  s.out_of_frame = std::abs(dyaw) >= half_h || std::abs(dpitch) >= half_v;
  if (std::abs(dyaw) >= std::numbers::pi / 2 || std::abs(dpitch) >= std::numbers::pi / 2) {
    s.out_of_frame = true;
    return s;
  }
  s.du = -f * detail::tan_term(dyaw, mode);
  s.dv = -f * detail::tan_term(dpitch, mode);
  return s;
}

inline Shift rotation_shift(double dyaw, double dpitch, double f, ShiftMode mode = ShiftMode::Auto) {
  Shift s;
  if (std::abs(dyaw) >= std::numbers::pi / 2 || std::abs(dpitch) >= std::numbers::pi / 2) {
    s.out_of_frame = true;
    return s;
  }
  s.du = -f * detail::tan_term(dyaw, mode);
  s.dv = -f * detail::tan_term(dpitch, mode);
  return s;
}

struct Reprojected {
  roi::Roi roi;
  bool visible = true;
};

// Pure rotation moves the center only.
inline Reprojected reproject_roi(const roi::Roi& r, const PoseSample& from, const PoseSample& to,
                                 const CameraIntrinsics& intr, ShiftMode mode = ShiftMode::Exact) {
  const Shift s = rotation_shift(wrap_angle(to.yaw - from.yaw), to.pitch - from.pitch, intr, mode);
  Reprojected out{r, true};
  if (s.out_of_frame && s.du == 0 && s.dv == 0) {
    out.visible = false;
    return out;
  }
  out.roi.u += s.du;
  out.roi.v += s.dv;
  const IRect frame = intr.frame();
  out.visible = intersect(out.roi.box(), to_box(frame)).area() > 0;
  if (out.visible) out.roi = roi::clamp_roi(out.roi, frame);
  return out;
}

struct LonLat {
  double lon = 0;  // radians, [-pi, pi)
  double lat = 0;  // radians, [-pi/2, pi/2]
};

inline LonLat to_world(double u, double v, const PoseSample& pose, const CameraIntrinsics& intr) {
  const double f = intr.focal();
  return {wrap_angle(pose.yaw + std::atan((u - intr.cx) / f)),
          std::clamp(pose.pitch + std::atan((v - intr.cy) / f), -std::numbers::pi / 2, std::numbers::pi / 2)};
}

// Inverse of to_world; nullopt behind the camera.
inline std::optional<std::pair<double, double>> from_world(const LonLat& w, const PoseSample& pose,
                                                           const CameraIntrinsics& intr) {
  const double dl = wrap_angle(w.lon - pose.yaw);
  const double dp = w.lat - pose.pitch;
  if (std::abs(dl) >= std::numbers::pi / 2 || std::abs(dp) >= std::numbers::pi / 2) return std::nullopt;
  const double f = intr.focal();
  return std::pair{intr.cx + f * std::tan(dl), intr.cy + f * std::tan(dp)};
}

// Equirectangular panorama of attended cells. Each cell remembers the
// quantized pose it was seen from and when it expires.
class WorldMap {
 public:
  struct Entry {
    int yaw_q = 0;
    int pitch_q = 0;
    double timestamp = 0;
    double expiry = 0;
  };

  explicit WorldMap(double step_deg = 1.0) : step_(deg2rad(step_deg)) {
    if (!(step_deg > 0 && step_deg <= 90)) throw ConfigError("world map step must be in (0, 90] degrees");
    cols_ = static_cast<int>(std::ceil(2 * std::numbers::pi / step_));
    rows_ = static_cast<int>(std::ceil(std::numbers::pi / step_)) + 1;
  }

  int cols() const noexcept { return cols_; }
  int rows() const noexcept { return rows_; }
  double step() const noexcept { return step_; }

  std::pair<int, int> cell_of(const LonLat& w) const noexcept {
    int c = static_cast<int>(std::floor((w.lon + std::numbers::pi) / step_));
    int r = static_cast<int>(std::floor((w.lat + std::numbers::pi / 2) / step_));
    return {std::clamp(c, 0, cols_ - 1), std::clamp(r, 0, rows_ - 1)};
  }

  LonLat cell_center(int c, int r) const noexcept {
    return {wrap_angle(-std::numbers::pi + (c + 0.5) * step_),
            std::clamp(-std::numbers::pi / 2 + (r + 0.5) * step_, -std::numbers::pi / 2, std::numbers::pi / 2)};
  }

  // Marks every cell whose center falls inside the ROI's angular footprint.
  void insert(const roi::Roi& r, const PoseSample& pose, const CameraIntrinsics& intr, double expiry) {
    const Box b = r.box();
    const LonLat lo = to_world(b.x, b.y, pose, intr);
    const LonLat hi = to_world(b.x1(), b.y1(), pose, intr);
    const auto [c0, r0] = cell_of(lo);
    const auto [c1, r1] = cell_of(hi);
    const Entry e{quantize(pose.yaw), quantize(pose.pitch), pose.t, expiry};
    for (int row = r0; row <= r1; ++row) {
      // Longitude may wrap across the seam.
      for (int c = c0;; c = (c + 1) % cols_) {
        cells_[key(c, row)] = e;
        if (c == c1) break;
      }
    }
  }

  void expire(double now) {
    std::erase_if(cells_, [now](const auto& kv) { return kv.second.expiry <= now; });
  }

  std::size_t size() const noexcept { return cells_.size(); }

  // Active cells visible from the pose, as frame rectangles.
  std::vector<IRect> visible_rects(const PoseSample& pose, const CameraIntrinsics& intr, double now) const {
    std::vector<IRect> out;
    for (const auto& [k, e] : cells_) {
      if (e.expiry <= now) continue;
      const int c = static_cast<int>(k % cols_), r = static_cast<int>(k / cols_);
      const LonLat a{wrap_angle(-std::numbers::pi + c * step_), -std::numbers::pi / 2 + r * step_};
      const LonLat b{wrap_angle(-std::numbers::pi + (c + 1) * step_), -std::numbers::pi / 2 + (r + 1) * step_};
      const auto pa = from_world(a, pose, intr), pb = from_world(b, pose, intr);
      if (!pa || !pb || pb->first < pa->first) continue;
      const IRect rect{static_cast<int>(std::floor(pa->first)), static_cast<int>(std::floor(pa->second)),
                       static_cast<int>(std::ceil(pb->first) - std::floor(pa->first)),
                       static_cast<int>(std::ceil(pb->second) - std::floor(pa->second))};
      if (auto clipped = intersect(rect, intr.frame()); !clipped.empty()) out.push_back(clipped);
    }
    return out;
  }

  // Pose tag quantization in steps of the grid size.
  int quantize(double angle) const noexcept { return static_cast<int>(std::lround(angle / step_)); }

 private:
  long long key(int c, int r) const noexcept { return static_cast<long long>(r) * cols_ + c; }

  double step_;
  int cols_ = 0;
  int rows_ = 0;
  std::map<long long, Entry> cells_;
};

struct TimeoutLaw {
  double t_max = 0.5;  // seconds at rest
  double beta = 1.0;   // per (rad/s) of angular rate

  double operator()(double angular_rate) const {
    if (!(t_max > 0) || !(beta >= 0)) throw ConfigError("timeout law needs t_max > 0 and beta >= 0");
    return t_max / (1.0 + beta * std::abs(angular_rate));
  }
};

inline double angular_rate(const PoseSample& a, const PoseSample& b) {
  const double dt = b.t - a.t;
  if (!(dt > 0)) return 0.0;
  return std::hypot(wrap_angle(b.yaw - a.yaw), b.pitch - a.pitch) / dt;
}

class BoxCache {
 public:
  struct Entry {
    Box box;
    PoseSample pose;
    double expiry = 0;
  };

  void insert(std::span<const Box> boxes, const PoseSample& pose, double timeout) {
    for (const auto& b : boxes) entries_.push_back({b, pose, pose.t + timeout});
  }

  void expire(double now) {
    std::erase_if(entries_, [now](const Entry& e) { return e.expiry <= now; });
  }

  // Unexpired boxes translated into the current view.
  std::vector<Box> predict(const PoseSample& now, const CameraIntrinsics& intr) const {
    std::vector<Box> out;
    for (const auto& e : entries_) {
      if (e.expiry <= now.t) continue;
      const Shift s = rotation_shift(wrap_angle(now.yaw - e.pose.yaw), now.pitch - e.pose.pitch, intr.focal(),
                                     ShiftMode::Exact);
      if (s.out_of_frame) continue;
      out.push_back({e.box.x + s.du, e.box.y + s.dv, e.box.w, e.box.h});
    }
    return out;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  void clear() noexcept { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
};

// alpha = min(alpha_max, a_fwd * dt / Z_min), only for forward acceleration.
inline double inflation_alpha(double a_fwd, double dt, double z_min, double alpha_max) {
  if (!(z_min > 0)) throw ConfigError("Z_min must be positive");
  if (!(dt > 0)) throw ConfigError("dt must be positive");
  if (!(alpha_max >= 0)) throw ConfigError("alpha_max must be non-negative");
  if (!(a_fwd > 0)) return 0.0;
  return std::min(alpha_max, a_fwd * dt / z_min);
}

// Side grows by (1 + alpha) about a fixed center, capped at the frame's
// shorter side, then clamped inside the frame.
inline roi::Roi inflate_roi(roi::Roi r, double alpha, const IRect& frame) {
  if (!(alpha >= 0)) throw ConfigError("alpha must be non-negative");
  r.side = std::min(r.side * (1.0 + alpha), static_cast<double>(std::min(frame.w, frame.h)));
  return roi::clamp_roi(r, frame);
}

struct InflationResult {
  roi::RoiSet rois;
  double alpha = 0;  // the alpha actually applied
};

// Best-effort inflation under the area budget: the largest common alpha not
// exceeding the request whose union stays within B (or alpha = 0 if none).
inline InflationResult inflate_rois(const roi::RoiSet& rois, double alpha, const IRect& frame, double budget) {
  auto apply = [&](double a) {
    roi::RoiSet out;
    out.reserve(rois.size());
    for (const auto& r : rois) out.push_back(inflate_roi(r, a, frame));
    return out;
  };
  auto fits = [&](const roi::RoiSet& s) { return static_cast<double>(roi::spatial_union(s, frame).total_area()) <= budget; };
  InflationResult res{apply(alpha), alpha};
  if (alpha == 0 || fits(res.rois)) return res;
  double lo = 0, hi = alpha;
  for (int i = 0; i < 40; ++i) {
    const double mid = (lo + hi) / 2;
    (fits(apply(mid)) ? lo : hi) = mid;
  }
  return {apply(lo), lo};
}

inline std::vector<PoseSample> read_imu_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open IMU trace " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty IMU trace");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,yaw,pitch,a_fwd") throw DataError(path.string() + ": expected header t,yaw,pitch,a_fwd");
  std::vector<PoseSample> out;
  for (int row = 2; std::getline(in, line); ++row) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = glance::detail::split_csv_line(line);
    const std::string where = path.string() + " row " + std::to_string(row);
    if (cells.size() != 4) throw DataError(where + ": expected 4 columns, got " + std::to_string(cells.size()));
    PoseSample p{glance::detail::parse_double(cells[1], where), glance::detail::parse_double(cells[2], where), glance::detail::parse_double(cells[3], where),
                 glance::detail::parse_double(cells[0], where)};
    try {
      p.validate();
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!out.empty() && !(p.t > out.back().t)) throw DataError(where + ": timestamps must increase");
    out.push_back(p);
  }
  return out;
}

inline void write_imu_csv(const std::filesystem::path& path, std::span<const PoseSample> trace) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "t,yaw,pitch,a_fwd\n";
  for (const auto& p : trace) out << p.t << ',' << p.yaw << ',' << p.pitch << ',' << p.a_fwd << '\n';
}

struct SyntheticImuConfig {
  int frames = 100;
  double dt = 1.0 / 30;
  double yaw_amp_deg = 10;
  double yaw_period_s = 4;
  double pitch_amp_deg = 3;
  double pitch_period_s = 6;
  double accel_amp = 0;       // m/s^2, sinusoidal forward acceleration amplitude
  double accel_period_s = 2;
  double noise_deg = 0.1;
  std::uint64_t seed = 0;
};

inline std::vector<PoseSample> synthetic_imu(const SyntheticImuConfig& c) {
  if (c.frames < 0 || !(c.dt > 0)) throw ConfigError("synthetic IMU needs frames >= 0 and dt > 0");
  const CounterRng rng(c.seed, 0x1A0);
  std::vector<PoseSample> out;
  out.reserve(c.frames);
  const double tau = 2 * std::numbers::pi;
  for (int i = 0; i < c.frames; ++i) {
    const double t = i * c.dt;
    const auto k = static_cast<std::uint64_t>(i);
    PoseSample p;
    p.t = t;
    p.yaw = deg2rad(c.yaw_amp_deg * std::sin(tau * t / c.yaw_period_s) + c.noise_deg * rng.normal(3 * k));
    p.pitch = deg2rad(c.pitch_amp_deg * std::sin(tau * t / c.pitch_period_s) + c.noise_deg * rng.normal(3 * k + 1));
    p.yaw = wrap_angle(p.yaw);
    p.pitch = std::clamp(p.pitch, -std::numbers::pi / 2, std::numbers::pi / 2);
    p.a_fwd = c.accel_amp * std::sin(tau * t / c.accel_period_s);
    out.push_back(p);
  }
  return out;
}

}  // namespace glance::stab
