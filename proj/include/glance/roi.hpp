#pragma once

// Gaze-to-fixation projection, uncertainty-driven ROI sizing, proposal
// generation, ROI suppression and exact spatial union of square ROIs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "glance/dwn.hpp"
#include "glance/errors.hpp"
#include "glance/geometry.hpp"
#include "glance/rng.hpp"

namespace glance::roi {

inline constexpr double deg2rad(double d) noexcept { return d * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double r) noexcept { return r * 180.0 / std::numbers::pi; }

inline double focal_length(double width_px, double fov_h_deg) {
  if (!(fov_h_deg > 0 && fov_h_deg < 180)) throw ConfigError("horizontal FOV must be in (0, 180) degrees");
  if (!(width_px > 0)) throw ConfigError("image width must be positive");
  return width_px / (2.0 * std::tan(deg2rad(fov_h_deg) / 2.0));
}

struct CameraIntrinsics {
  int width = 640;
  int height = 480;
  double fov_h_deg = 90.0;
  double cx = 320.0;
  double cy = 240.0;

  double focal() const { return focal_length(width, fov_h_deg); }

  // Principal point at the frame center.
  static CameraIntrinsics centered(int w, int h, double fov_deg) {
    CameraIntrinsics c{w, h, fov_deg, w / 2.0, h / 2.0};
    c.validate();
    return c;
  }
  void validate() const {
    if (width <= 0 || height <= 0) throw ConfigError("camera dimensions must be positive");
    (void)focal();
  }
  IRect frame() const noexcept { return {0, 0, width, height}; }
};

struct Fixation {
  double u = 0;
  double v = 0;
  bool out_of_frame = false;  // the raw projection was clamped
};

// Pinhole projection with +z forward and the principal point at (cx, cy).
inline Fixation project_gaze(const dwn::Vec3& g, const CameraIntrinsics& intr) {
  if (!(g[2] > 0.05)) throw GazeAwayError("gaze does not point toward the image plane (g_z <= 0.05)");
  const double f = intr.focal();
  Fixation p{intr.cx + f * g[0] / g[2], intr.cy + f * g[1] / g[2], false};
  const double umax = intr.width - 1e-9, vmax = intr.height - 1e-9;
  if (p.u < 0 || p.u > umax || p.v < 0 || p.v > vmax) {
    p.out_of_frame = true;
    p.u = std::clamp(p.u, 0.0, umax);
    p.v = std::clamp(p.v, 0.0, vmax);
  }
  return p;
}

// Pixel deviation produced by an angular error of theta_max.
inline double uncertainty_radius(const CameraIntrinsics& intr, double theta_max_deg) {
  if (!(theta_max_deg > 0 && theta_max_deg < intr.fov_h_deg / 2))
    throw ConfigError("theta_max must be in (0, FOV/2)");
  return intr.focal() * std::tan(deg2rad(theta_max_deg));
}

struct RoiSide {
  double raw = 0;
  int snapped = 0;
};

inline constexpr int kDefaultSides[] = {48, 64, 80};

// Nearest allowed side; ties go to the larger side.
inline int snap_side(double s, std::span<const int> allowed) {
  if (allowed.empty()) throw ConfigError("empty ROI side set");
  int best = allowed.front();
  double best_d = std::abs(s - best);
  for (int a : allowed) {
    const double d = std::abs(s - a);
    if (d < best_d || (d == best_d && a > best)) {
      best = a;
      best_d = d;
    }
  }
  return best;
}

// S(p) = 2 e p.
inline RoiSide roi_side(double hit_probability, double e, std::span<const int> allowed = kDefaultSides) {
  if (!(hit_probability >= 0 && hit_probability <= 1)) throw ConfigError("hit probability must be in [0, 1]");
  const double raw = 2.0 * e * hit_probability;
  return {raw, snap_side(raw, allowed)};
}

struct Roi {
  double u = 0;  // center
  double v = 0;
  double side = 0;
  double weight = 1.0;
  int born_t = 0;

  Box box() const noexcept { return {u - side / 2, v - side / 2, side, side}; }
  friend bool operator==(const Roi&, const Roi&) = default;
};

using RoiSet = std::vector<Roi>;

// Shifts the center so the square lies inside the frame (when it fits).
inline Roi clamp_roi(Roi r, const IRect& frame) {
  const double half = r.side / 2;
  auto clamp_axis = [half](double c, double lo, double hi) {
    if (hi - lo <= 2 * half) return (lo + hi) / 2;
    return std::clamp(c, lo + half, hi - half);
  };
  r.u = clamp_axis(r.u, frame.x, frame.x1());
  r.v = clamp_axis(r.v, frame.y, frame.y1());
  return r;
}

// Pixel footprint: left/top edges rounded to the nearest pixel, clipped to
// the frame.
inline IRect pixel_rect(const Roi& r, const IRect& frame) {
  const int side = static_cast<int>(std::lround(r.side));
  const IRect raw{static_cast<int>(std::lround(r.u - r.side / 2)), static_cast<int>(std::lround(r.v - r.side / 2)),
                  side, side};
  return intersect(raw, frame);
}

struct ProposalConfig {
  int count = 1;
  double sigma = -1;  // isotropic offset std-dev in pixels; negative selects e/2
  std::uint64_t seed = 0;
};

// ROI #1 at the fixation; the rest offset by seeded isotropic Gaussian
// micro-saccades. Draws depend on (seed, frame, index) only, so a larger
// count extends a smaller one.
inline RoiSet propose_rois(const Fixation& p, double side, double e, const ProposalConfig& cfg, const IRect& frame,
                           int frame_index = 0) {
  if (cfg.count < 1) throw ConfigError("ROI count must be >= 1");
  const double sigma = cfg.sigma >= 0 ? cfg.sigma : e / 2;
  const CounterRng rng(cfg.seed, 0xA0000000ULL + static_cast<std::uint64_t>(frame_index));
  RoiSet out;
  out.reserve(cfg.count);
  for (int i = 0; i < cfg.count; ++i) {
    Roi r{p.u, p.v, side, 1.0, frame_index};
    if (i > 0) {
      r.u += sigma * rng.normal(2 * static_cast<std::uint64_t>(i));
      r.v += sigma * rng.normal(2 * static_cast<std::uint64_t>(i) + 1);
    }
    out.push_back(clamp_roi(r, frame));
  }
  return out;
}

// Greedy suppression ordered by weight, then recency, then input order.
inline RoiSet roi_nms(const RoiSet& rois, double iou_thresh) {
  std::vector<std::size_t> order(rois.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rois[a].weight != rois[b].weight) return rois[a].weight > rois[b].weight;
    return rois[a].born_t > rois[b].born_t;
  });
  RoiSet kept;
  for (std::size_t idx : order) {
    const Box b = rois[idx].box();
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const Roi& k) { return iou(k.box(), b) > iou_thresh; });
    if (!suppressed) kept.push_back(rois[idx]);
  }
  return kept;
}

// Union of integer rectangles kept in a canonical disjoint decomposition:
// maximal vertical slabs with constant cross-section, each split into maximal
// y-intervals. Two masks covering the same pixels have identical rects().
class RegionMask {
 public:
  RegionMask() = default;

  static RegionMask from_rects(std::span<const IRect> rects) {
    RegionMask m;
    m.build(rects);
    return m;
  }

  const std::vector<IRect>& rects() const noexcept { return rects_; }
  std::int64_t total_area() const noexcept { return area_; }
  bool empty() const noexcept { return rects_.empty(); }

  bool contains(int x, int y) const noexcept {
    return std::any_of(rects_.begin(), rects_.end(), [&](const IRect& r) { return r.contains(x, y); });
  }

  std::int64_t intersection_area(const IRect& r) const noexcept {
    std::int64_t a = 0;
    for (const auto& m : rects_) a += intersect(m, r).area();
    return a;
  }

  IRect bounds() const noexcept {
    IRect b;
    for (const auto& r : rects_) b = bounding(b, r);
    return b;
  }

  RegionMask united(const RegionMask& other) const {
    std::vector<IRect> all = rects_;
    all.insert(all.end(), other.rects_.begin(), other.rects_.end());
    return from_rects(all);
  }

  RegionMask clipped(const IRect& frame) const {
    std::vector<IRect> out;
    for (const auto& r : rects_)
      if (auto c = intersect(r, frame); !c.empty()) out.push_back(c);
    return from_rects(out);
  }

  // mask subset of other
  bool subset_of(const RegionMask& other) const { return other.united(*this) == other; }

  friend bool operator==(const RegionMask&, const RegionMask&) = default;

 private:
  void build(std::span<const IRect> input) {
    std::vector<IRect> rs;
    for (const auto& r : input)
      if (!r.empty()) rs.push_back(r);
    rects_.clear();
    area_ = 0;
    if (rs.empty()) return;
    std::vector<int> xs;
    xs.reserve(rs.size() * 2);
    for (const auto& r : rs) {
      xs.push_back(r.x);
      xs.push_back(r.x1());
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    using Intervals = std::vector<std::pair<int, int>>;
    Intervals prev;
    int prev_x0 = 0, prev_x1 = 0;
    auto flush = [&]() {
      for (const auto& [y0, y1] : prev) rects_.push_back({prev_x0, y0, prev_x1 - prev_x0, y1 - y0});
    };
    for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
      const int x0 = xs[s], x1 = xs[s + 1];
      Intervals iv;
      for (const auto& r : rs)
        if (r.x <= x0 && r.x1() >= x1) iv.emplace_back(r.y, r.y1());
      std::sort(iv.begin(), iv.end());
      Intervals merged;
      for (const auto& seg : iv) {
        if (!merged.empty() && seg.first <= merged.back().second)
          merged.back().second = std::max(merged.back().second, seg.second);
        else
          merged.push_back(seg);
      }
      if (!prev.empty() && merged == prev && prev_x1 == x0) {
        prev_x1 = x1;
        continue;
      }
      flush();
      prev = std::move(merged);
      prev_x0 = x0;
      prev_x1 = x1;
    }
    flush();
    for (const auto& r : rects_) area_ += r.area();
  }

  std::vector<IRect> rects_;
  std::int64_t area_ = 0;
};

inline RegionMask spatial_union(const RoiSet& rois, const IRect& frame) {
  std::vector<IRect> rects;
  rects.reserve(rois.size());
  for (const auto& r : rois) rects.push_back(pixel_rect(r, frame));
  return RegionMask::from_rects(rects);
}

}  // namespace glance::roi
