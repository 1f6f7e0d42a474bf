#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glance/errors.hpp"

namespace glance {

// Dense row-major single-channel image.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int w, int h, T fill = T{})
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w < 0 || h < 0) throw DataError("negative image dimensions");
  }

  T& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  std::span<const T> row(int y) const {
    return {pixels.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)};
  }
  std::span<T> row(int y) {
    return {pixels.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)};
  }

  bool empty() const noexcept { return pixels.empty(); }
  std::size_t size() const noexcept { return pixels.size(); }

  friend bool operator==(const Image&, const Image&) = default;
};

using GrayImage = Image<std::uint8_t>;
// Eye crops normalized to [-1, 1].
using FloatImage = Image<double>;

inline FloatImage to_signed_unit(const GrayImage& img) {
  FloatImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = img.pixels[i] / 127.5 - 1.0;
  return out;
}

// Bilinear resampling with pixel-center alignment; used when stored eye crops
// are not already S x S.
inline FloatImage resize_bilinear(const FloatImage& src, int w, int h) {
  if (src.width == w && src.height == h) return src;
  if (src.empty()) throw DataError("cannot resize an empty image");
  FloatImage dst(w, h);
  const double sx = static_cast<double>(src.width) / w;
  const double sy = static_cast<double>(src.height) / h;
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  for (int y = 0; y < h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = clampi(static_cast<int>(fy < 0 ? fy - 1 : fy), 0, src.height - 1);
    const int y1 = clampi(y0 + 1, 0, src.height - 1);
    const double ty = fy - y0 < 0 ? 0.0 : (fy - y0 > 1 ? 1.0 : fy - y0);
    for (int x = 0; x < w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = clampi(static_cast<int>(fx < 0 ? fx - 1 : fx), 0, src.width - 1);
      const int x1 = clampi(x0 + 1, 0, src.width - 1);
      const double tx = fx - x0 < 0 ? 0.0 : (fx - x0 > 1 ? 1.0 : fx - x0);
      const double top = src.at(x0, y0) * (1 - tx) + src.at(x1, y0) * tx;
      const double bot = src.at(x0, y1) * (1 - tx) + src.at(x1, y1) * tx;
      dst.at(x, y) = top * (1 - ty) + bot * ty;
    }
  }
  return dst;
}

}  // namespace glance
