#pragma once

// Union-of-ROIs mosaic: connected components of a RegionMask are covered by
// their bounding rectangles and shelf-packed into one canvas. Placements map
// canvas rectangles back to frame rectangles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "glance/errors.hpp"
#include "glance/geometry.hpp"
#include "glance/image.hpp"
#include "glance/roi.hpp"

namespace glance::mosaic {

struct Placement {
  IRect src;  // frame coordinates
  IRect dst;  // canvas coordinates, same size as src

  friend bool operator==(const Placement&, const Placement&) = default;
};

struct MosaicPlan {
  int width = 0;
  int height = 0;
  std::vector<Placement> placements;

  std::int64_t area() const noexcept { return static_cast<std::int64_t>(width) * height; }
  bool empty() const noexcept { return placements.empty(); }
  std::int64_t placed_area() const noexcept {
    std::int64_t a = 0;
    for (const auto& p : placements) a += p.src.area();
    return a;
  }
};

struct Mosaic {
  GrayImage canvas;
  std::vector<Placement> placements;
  std::int64_t area() const noexcept { return static_cast<std::int64_t>(canvas.width) * canvas.height; }
};

namespace detail {

inline bool touches(const IRect& a, const IRect& b) noexcept {
  // 4-adjacency: shared edge of positive length, or overlap.
  const bool x_overlap = std::min(a.x1(), b.x1()) > std::max(a.x, b.x);
  const bool y_overlap = std::min(a.y1(), b.y1()) > std::max(a.y, b.y);
  const bool x_touch = std::min(a.x1(), b.x1()) >= std::max(a.x, b.x);
  const bool y_touch = std::min(a.y1(), b.y1()) >= std::max(a.y, b.y);
  return (x_overlap && y_touch) || (y_overlap && x_touch);
}

inline bool overlaps(const IRect& a, const IRect& b) noexcept { return !intersect(a, b).empty(); }

struct Dsu {
  std::vector<std::size_t> parent;
  explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct Shelf {
  int y = 0;
  int height = 0;
  int used = 0;
};

// Shelf packing into a fixed canvas width; returns canvas height and fills dst.
inline int shelf_pack(const std::vector<IRect>& sorted, int width, std::vector<IRect>& dst) {
  std::vector<Shelf> shelves;
  int total = 0;
  dst.assign(sorted.size(), {});
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const IRect& r = sorted[i];
    Shelf* slot = nullptr;
    for (auto& s : shelves)
      if (s.used + r.w <= width && r.h <= s.height) {
        slot = &s;
        break;
      }
    if (!slot) {
      shelves.push_back({total, r.h, 0});
      total += r.h;
      slot = &shelves.back();
    }
    dst[i] = {slot->used, slot->y, r.w, r.h};
    slot->used += r.w;
  }
  return total;
}

}  // namespace detail

// Bounding rectangles of the mask's 4-connected components, with any
// overlapping rectangles merged until they are pairwise disjoint, so every
// mask pixel falls in exactly one rectangle.
inline std::vector<IRect> component_rects(const roi::RegionMask& mask) {
  const auto& rs = mask.rects();
  detail::Dsu dsu(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i)
    for (std::size_t j = i + 1; j < rs.size(); ++j)
      if (detail::touches(rs[i], rs[j])) dsu.unite(i, j);
  std::vector<IRect> boxes;
  std::vector<std::size_t> slot(rs.size(), SIZE_MAX);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const std::size_t root = dsu.find(i);
    if (slot[root] == SIZE_MAX) {
      slot[root] = boxes.size();
      boxes.push_back(rs[i]);
    } else {
      boxes[slot[root]] = bounding(boxes[slot[root]], rs[i]);
    }
  }
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t i = 0; i < boxes.size() && !merged; ++i)
      for (std::size_t j = i + 1; j < boxes.size(); ++j)
        if (detail::overlaps(boxes[i], boxes[j])) {
          boxes[i] = bounding(boxes[i], boxes[j]);
          boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
          break;
        }
  }
  std::sort(boxes.begin(), boxes.end(), [](const IRect& a, const IRect& b) {
    return std::tie(a.y, a.x, a.h, a.w) < std::tie(b.y, b.x, b.h, b.w);
  });
  return boxes;
}

// Tries a handful of canvas widths and keeps the smallest canvas (ties: the
// squarer one, then the narrower one).
inline MosaicPlan plan_mosaic(const roi::RegionMask& mask) {
  MosaicPlan plan;
  if (mask.empty()) return plan;
  std::vector<IRect> rects = component_rects(mask);
  std::stable_sort(rects.begin(), rects.end(),
                   [](const IRect& a, const IRect& b) { return a.h != b.h ? a.h > b.h : a.w > b.w; });

  int widest = 0, sum_w = 0;
  std::int64_t sum_area = 0;
  for (const auto& r : rects) {
    widest = std::max(widest, r.w);
    sum_w += r.w;
    sum_area += r.area();
  }
  std::vector<int> widths{widest, sum_w};
  const int root = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(sum_area))));
  for (double f : {1.0, 1.1, 1.25, 1.5, 2.0})
    widths.push_back(std::clamp(static_cast<int>(root * f), widest, sum_w));
  // Prefix sums of widths in packing order are natural shelf breaks.
  for (int acc = 0; const auto& r : rects) {
    acc += r.w;
    if (acc >= widest) widths.push_back(acc);
  }
  std::sort(widths.begin(), widths.end());
  widths.erase(std::unique(widths.begin(), widths.end()), widths.end());

  std::optional<std::int64_t> best_area;
  int best_w = 0, best_h = 0;
  std::vector<IRect> best_dst, dst;
  for (int w : widths) {
    const int h = detail::shelf_pack(rects, w, dst);
    int used_w = 0;
    for (const auto& d : dst) used_w = std::max(used_w, d.x1());
    const std::int64_t area = static_cast<std::int64_t>(used_w) * h;
    const bool better = !best_area || area < *best_area ||
                        (area == *best_area && std::abs(used_w - h) < std::abs(best_w - best_h));
    if (better) {
      best_area = area;
      best_w = used_w;
      best_h = h;
      best_dst = dst;
    }
  }
  plan.width = best_w;
  plan.height = best_h;
  for (std::size_t i = 0; i < rects.size(); ++i) plan.placements.push_back({rects[i], best_dst[i]});
  return plan;
}

// Copies every placement's source pixels into the canvas. Pixels inside a
// component rectangle but outside the mask are copied too: the detector sees
// rectangles.
inline Mosaic build_mosaic(const GrayImage& frame, const MosaicPlan& plan) {
  Mosaic m;
  m.placements = plan.placements;
  m.canvas = GrayImage(plan.width, plan.height);
  for (const auto& p : plan.placements) {
    if (p.src.x < 0 || p.src.y < 0 || p.src.x1() > frame.width || p.src.y1() > frame.height)
      throw DataError("mosaic source rectangle outside the frame");
    for (int y = 0; y < p.src.h; ++y)
      std::copy_n(&frame.at(p.src.x, p.src.y + y), p.src.w, &m.canvas.at(p.dst.x, p.dst.y + y));
  }
  return m;
}

inline Mosaic build_mosaic(const GrayImage& frame, const roi::RegionMask& mask) {
  if (mask.empty()) throw DataError("empty mask: nothing to mosaic");
  const roi::RegionMask clipped = mask.clipped({0, 0, frame.width, frame.height});
  if (clipped.total_area() != mask.total_area()) throw DataError("mask extends outside the frame");
  return build_mosaic(frame, plan_mosaic(mask));
}

struct Backprojection {
  std::vector<Box> boxes;  // frame coordinates
  bool orphan = false;     // touched no placement
};

namespace detail {

inline bool box_touches(const Box& a, const Box& b, double eps = 1e-9) noexcept {
  const double ox = std::min(a.x1(), b.x1()) - std::max(a.x, b.x);
  const double oy = std::min(a.y1(), b.y1()) - std::max(a.y, b.y);
  return (ox > eps && oy >= -eps) || (oy > eps && ox >= -eps);
}

}  // namespace detail

// Canvas box -> frame boxes. A box spanning several placements is split per
// placement; pieces that touch in frame coordinates are merged back.
inline Backprojection backproject(const Box& canvas_box, const std::vector<Placement>& placements) {
  Backprojection out;
  for (const auto& p : placements) {
    const Box piece = intersect(canvas_box, to_box(p.dst));
    if (piece.area() <= 0) continue;
    out.boxes.push_back({piece.x - p.dst.x + p.src.x, piece.y - p.dst.y + p.src.y, piece.w, piece.h});
  }
  if (out.boxes.empty()) {
    out.orphan = true;
    return out;
  }
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t i = 0; i < out.boxes.size() && !merged; ++i)
      for (std::size_t j = i + 1; j < out.boxes.size(); ++j)
        if (detail::box_touches(out.boxes[i], out.boxes[j])) {
          out.boxes[i] = bounding(out.boxes[i], out.boxes[j]);
          out.boxes.erase(out.boxes.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
          break;
        }
  }
  return out;
}

// Point map for pixels; nullopt when the canvas point is in no placement.
inline std::optional<std::pair<int, int>> canvas_to_frame(int cx, int cy, const std::vector<Placement>& placements) {
  for (const auto& p : placements)
    if (p.dst.contains(cx, cy)) return std::pair{cx - p.dst.x + p.src.x, cy - p.dst.y + p.src.y};
  return std::nullopt;
}

inline std::optional<std::pair<int, int>> frame_to_canvas(int fx, int fy, const std::vector<Placement>& placements) {
  for (const auto& p : placements)
    if (p.src.contains(fx, fy)) return std::pair{fx - p.src.x + p.dst.x, fy - p.src.y + p.dst.y};
  return std::nullopt;
}

inline nlohmann::json placements_to_json(const std::vector<Placement>& placements) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : placements)
    arr.push_back({{"src", {p.src.x, p.src.y, p.src.w, p.src.h}}, {"dst", {p.dst.x, p.dst.y, p.dst.w, p.dst.h}}});
  return arr;
}

inline std::vector<Placement> placements_from_json(const nlohmann::json& arr) {
  auto rect = [](const nlohmann::json& a) {
    if (!a.is_array() || a.size() != 4) throw DataError("placement rectangle must be [x,y,w,h]");
    return IRect{a[0].get<int>(), a[1].get<int>(), a[2].get<int>(), a[3].get<int>()};
  };
  if (!arr.is_array()) throw DataError("placements must be a JSON list");
  std::vector<Placement> out;
  for (const auto& e : arr) out.push_back({rect(e.at("src")), rect(e.at("dst"))});
  return out;
}

}  // namespace glance::mosaic
