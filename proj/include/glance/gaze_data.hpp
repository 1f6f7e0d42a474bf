#pragma once

// Gaze datasets: the on-disk index.csv layout and a seeded synthetic eye-crop
// generator used by tests and demos.
//
// index.csv columns: path,gx,gy,gz,subject (header row required). Paths are
// relative to the directory holding index.csv.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "glance/dwn.hpp"
#include "glance/errors.hpp"
#include "glance/image.hpp"
#include "glance/image_io.hpp"
#include "glance/rng.hpp"

namespace glance {

struct GazeIndexRow {
  std::string path;
  dwn::Vec3 gaze{};
  std::string subject;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": not a number: '" + s + "'");
  }
}

}  // namespace detail

inline std::vector<GazeIndexRow> read_gaze_index(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(csv_path.string() + ": empty index");
  const auto header = detail::split_csv_line(line);
  const std::vector<std::string> expected{"path", "gx", "gy", "gz", "subject"};
  if (header != expected) throw DataError(csv_path.string() + ": row 1: expected header path,gx,gy,gz,subject");
  std::vector<GazeIndexRow> rows;
  for (int row = 2; std::getline(in, line); ++row) {
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = csv_path.string() + ": row " + std::to_string(row);
    if (cells.size() != 5)
      throw DataError(where + ": expected 5 columns, got " + std::to_string(cells.size()));
    GazeIndexRow r;
    r.path = cells[0];
    for (int c = 0; c < 3; ++c) r.gaze[c] = detail::parse_double(cells[1 + c], where);
    r.subject = cells[4];
    rows.push_back(std::move(r));
  }
  return rows;
}

// Loads every sample under `dir`, mapping 8-bit intensities onto [-1, 1].
// Crops must already be input_size square unless `resize` is set, in which
// case they are resampled bilinearly.
inline std::vector<dwn::GazeSample> load_gaze_dataset(const std::filesystem::path& dir, int input_size,
                                                      bool resize = false) {
  const auto index = dir / "index.csv";
  if (!std::filesystem::exists(index)) throw DataError("missing " + index.string());
  const auto rows = read_gaze_index(index);
  if (rows.empty()) throw DataError(index.string() + ": no samples");
  std::vector<dwn::GazeSample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    auto img = to_signed_unit(read_gray(dir / r.path));
    if (!resize && (img.width != input_size || img.height != input_size))
      throw DataError((dir / r.path).string() + ": image is " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + ", model expects " + std::to_string(input_size) + "x" +
                      std::to_string(input_size));
    out.push_back({resize_bilinear(img, input_size, input_size), dwn::normalize_target(r.gaze), r.subject});
  }
  return out;
}

// Leave-one-person-out split.
struct GazeSplit {
  std::vector<dwn::GazeSample> train;
  std::vector<dwn::GazeSample> holdout;
};

inline GazeSplit split_holdout(const std::vector<dwn::GazeSample>& all, const std::string& subject) {
  GazeSplit s;
  for (const auto& x : all) (subject.empty() || x.subject != subject ? s.train : s.holdout).push_back(x);
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic eye crops

struct SyntheticGazeConfig {
  int input_size = 56;
  int samples_per_cluster = 120;
  int subjects = 4;
  double cluster_sigma_deg = 3.0;
  double pixel_noise = 0.05;
  std::uint64_t seed = 7;
};

inline dwn::Vec3 gaze_from_angles(double yaw_deg, double pitch_deg) {
  const double yaw = yaw_deg * std::numbers::pi / 180.0;
  const double pitch = pitch_deg * std::numbers::pi / 180.0;
  return dwn::normalize_target({std::sin(yaw) * std::cos(pitch), std::sin(pitch), std::cos(yaw) * std::cos(pitch)});
}

// Renders a bright sclera ellipse with a dark pupil displaced along the gaze.
// `subject_variant` perturbs pupil radius and contrast.
inline FloatImage render_eye(const dwn::Vec3& gaze, int size, int subject_variant, const CounterRng& noise,
                             double pixel_noise) {
  FloatImage img(size, size, -0.6);
  const double c = (size - 1) / 2.0;
  const double reach = 0.3 * size;
  const double px = c + reach * gaze[0] / std::max(gaze[2], 0.2);
  const double py = c + reach * gaze[1] / std::max(gaze[2], 0.2);
  const double pupil_r = size * (0.12 + 0.01 * (subject_variant % 3));
  const double iris_r = pupil_r * 1.8;
  const double sclera = 0.7 - 0.05 * (subject_variant % 2);
  std::uint64_t counter = 0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double ex = (x - c) / (0.48 * size);
      const double ey = (y - c) / (0.3 * size);
      double v = ex * ex + ey * ey <= 1.0 ? sclera : -0.6;
      const double d = std::hypot(x - px, y - py);
      if (d <= iris_r) v = -0.2;
      if (d <= pupil_r) v = -0.95;
      v += pixel_noise * noise.normal(counter++);
      img.at(x, y) = std::clamp(v, -1.0, 1.0);
    }
  }
  return img;
}

// Three clusters of gaze directions, spread over several synthetic subjects.
inline std::vector<dwn::GazeSample> make_synthetic_gaze(const SyntheticGazeConfig& cfg) {
  static constexpr double centers[3][2] = {{-20.0, -5.0}, {18.0, -10.0}, {2.0, 18.0}};
  std::vector<dwn::GazeSample> out;
  const CounterRng rng(cfg.seed, 11);
  std::uint64_t idx = 0;
  for (int cl = 0; cl < 3; ++cl) {
    for (int i = 0; i < cfg.samples_per_cluster; ++i, ++idx) {
      const double yaw = centers[cl][0] + cfg.cluster_sigma_deg * rng.normal(4 * idx);
      const double pitch = centers[cl][1] + cfg.cluster_sigma_deg * rng.normal(4 * idx + 1);
      const int subject = static_cast<int>(idx % static_cast<std::uint64_t>(std::max(1, cfg.subjects)));
      const auto g = gaze_from_angles(yaw, pitch);
      char name[16];
      std::snprintf(name, sizeof name, "p%02d", subject);
      out.push_back({render_eye(g, cfg.input_size, subject, rng.substream(1000 + idx), cfg.pixel_noise), g, name});
    }
  }
  return out;
}

inline GrayImage to_gray8(const FloatImage& img) {
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp((img.pixels[i] + 1.0) * 127.5, 0.0, 255.0)));
  return out;
}

// Writes samples as PGM files plus index.csv.
inline void write_gaze_dataset(const std::filesystem::path& dir, const std::vector<dwn::GazeSample>& samples) {
  std::filesystem::create_directories(dir / "images");
  std::ofstream idx(dir / "index.csv");
  if (!idx) throw DataError("cannot write " + (dir / "index.csv").string());
  idx << "path,gx,gy,gz,subject\n";
  idx.precision(17);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "images/%06zu.pgm", i);
    write_pgm(dir / name, to_gray8(samples[i].image));
    const auto& g = samples[i].target;
    idx << name << ',' << g[0] << ',' << g[1] << ',' << g[2] << ',' << samples[i].subject << '\n';
  }
}

}  // namespace glance
