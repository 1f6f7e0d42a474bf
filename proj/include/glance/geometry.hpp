#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace glance {

// Integer pixel rectangle, half-open: [x, x+w) x [y, y+h).
struct IRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int x1() const noexcept { return x + w; }
  int y1() const noexcept { return y + h; }
  bool empty() const noexcept { return w <= 0 || h <= 0; }
  std::int64_t area() const noexcept { return empty() ? 0 : static_cast<std::int64_t>(w) * h; }
  bool contains(int px, int py) const noexcept { return px >= x && px < x1() && py >= y && py < y1(); }

  friend bool operator==(const IRect&, const IRect&) = default;
  friend auto operator<=>(const IRect&, const IRect&) = default;
};

inline IRect intersect(const IRect& a, const IRect& b) noexcept {
  const int x0 = std::max(a.x, b.x), y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x1(), b.x1()), y1 = std::min(a.y1(), b.y1());
  if (x1 <= x0 || y1 <= y0) return {};
  return {x0, y0, x1 - x0, y1 - y0};
}

inline IRect bounding(const IRect& a, const IRect& b) noexcept {
  if (a.empty()) return b;
  if (b.empty()) return a;
  const int x0 = std::min(a.x, b.x), y0 = std::min(a.y, b.y);
  return {x0, y0, std::max(a.x1(), b.x1()) - x0, std::max(a.y1(), b.y1()) - y0};
}

// Continuous axis-aligned box (x, y, w, h) in pixels.
struct Box {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double x1() const noexcept { return x + w; }
  double y1() const noexcept { return y + h; }
  double area() const noexcept { return w > 0 && h > 0 ? w * h : 0.0; }
  double cx() const noexcept { return x + w / 2; }
  double cy() const noexcept { return y + h / 2; }

  friend bool operator==(const Box&, const Box&) = default;
};

inline Box to_box(const IRect& r) noexcept { return {double(r.x), double(r.y), double(r.w), double(r.h)}; }

inline Box intersect(const Box& a, const Box& b) noexcept {
  const double x0 = std::max(a.x, b.x), y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.x1(), b.x1()), y1 = std::min(a.y1(), b.y1());
  if (x1 <= x0 || y1 <= y0) return {x0, y0, 0, 0};
  return {x0, y0, x1 - x0, y1 - y0};
}

inline Box bounding(const Box& a, const Box& b) noexcept {
  const double x0 = std::min(a.x, b.x), y0 = std::min(a.y, b.y);
  return {x0, y0, std::max(a.x1(), b.x1()) - x0, std::max(a.y1(), b.y1()) - y0};
}

// Ratio form (inter / union) so exact boundary values such as 0.3 compare as
// expected against the threshold.
inline double iou(const Box& a, const Box& b) noexcept {
  const double inter = intersect(a, b).area();
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace glance
