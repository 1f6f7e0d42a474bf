#pragma once

// Differentiable weightless gaze estimator: preprocessing, thermometer
// encoding, a single layer of lookup tables and a linear head.
//
// Conventions shared with the serialized format:
//   * features are flattened row-major from the pooled grid;
//   * thermometer bits are laid out feature-major, bit index j*K + k;
//   * LUT address digits are MSB-first: selected bit m contributes 2^(n-1-m).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "glance/errors.hpp"
#include "glance/image.hpp"
#include "glance/rng.hpp"

namespace glance::dwn {

using Vec3 = std::array<double, 3>;
using FeatureVector = std::vector<double>;
using SoftBits = std::vector<double>;
using BitVector = std::vector<std::uint8_t>;
using LatentVector = std::vector<double>;

struct DwnConfig {
  int input_size = 56;
  int pool_k = 4;
  int therm_bits = 4;
  double temperature = 0.5;
  // Training anneals the encoder temperature geometrically from `temperature`
  // to `temperature_final` over the epochs; equal values keep it constant.
  double temperature_final = 1e-4;
  int num_luts = 131;
  int addr_bits = 6;
  double loss_lambda = 0.3;
  double learning_rate = 3e-3;
  double weight_decay = 1e-5;
  double grad_clip = 5.0;
  int batch_size = 64;
  int epochs = 30;
  // Final epochs during which LUT entries are projected onto +/- the per-LUT
  // mean magnitude, matching the 1-bit export.
  int binarize_epochs = 5;
  std::uint64_t seed = 0;

  int grid() const noexcept { return pool_k > 0 ? input_size / pool_k : 0; }
  int num_features() const noexcept { return grid() * grid(); }
  int num_bits() const noexcept { return num_features() * therm_bits; }
  std::size_t table_size() const noexcept { return std::size_t{1} << addr_bits; }

  void validate() const {
    if (input_size <= 0 || pool_k <= 0) throw ConfigError("input_size and pool_k must be positive");
    if (input_size % pool_k != 0) throw ConfigError("input_size must be a multiple of pool_k");
    if (therm_bits < 1) throw ConfigError("therm_bits must be >= 1");
    if (addr_bits < 1 || addr_bits > 16) throw ConfigError("addr_bits must be in [1, 16]");
    if (num_luts < 1) throw ConfigError("num_luts must be >= 1");
    if (!(temperature > 0)) throw ConfigError("temperature must be > 0");
    if (!(temperature_final > 0 && temperature_final <= temperature))
      throw ConfigError("temperature_final must be in (0, temperature]");
    if (binarize_epochs < 0) throw ConfigError("binarize_epochs must be >= 0");
    if (!(loss_lambda > 0 && loss_lambda < 1)) throw ConfigError("loss_lambda must be in (0, 1)");
    if (addr_bits > num_bits())
      throw ConfigError("addr_bits exceeds the number of thermometer bits; a LUT cannot draw distinct inputs");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    if (!(grad_clip > 0)) throw ConfigError("grad_clip must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
  }
};

struct ThresholdTable {
  int features = 0;
  int bits = 0;
  std::vector<double> tau;  // features x bits, row-major
  bool fitted = false;

  double at(int j, int k) const { return tau[static_cast<std::size_t>(j) * bits + k]; }
  std::span<const double> row(int j) const {
    return {tau.data() + static_cast<std::size_t>(j) * bits, static_cast<std::size_t>(bits)};
  }
  friend bool operator==(const ThresholdTable&, const ThresholdTable&) = default;
};

struct ThresholdFit {
  ThresholdTable table;
  std::vector<int> degenerate_features;  // features whose samples were all identical
};

struct ConnectionMap {
  int luts = 0;
  int addr_bits = 0;
  int num_bits = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> index;  // luts x addr_bits

  std::span<const std::uint32_t> row(int i) const {
    return {index.data() + static_cast<std::size_t>(i) * addr_bits, static_cast<std::size_t>(addr_bits)};
  }
  friend bool operator==(const ConnectionMap&, const ConnectionMap&) = default;
};

struct LutBank {
  int luts = 0;
  int addr_bits = 0;
  std::vector<double> entries;  // luts x 2^addr_bits

  std::size_t table_size() const noexcept { return std::size_t{1} << addr_bits; }
  std::span<const double> row(int i) const { return {entries.data() + i * table_size(), table_size()}; }
  std::span<double> row(int i) { return {entries.data() + i * table_size(), table_size()}; }
  friend bool operator==(const LutBank&, const LutBank&) = default;
};

struct LinearHead {
  int latent = 0;
  std::vector<double> weights;  // 3 x latent, row-major
  Vec3 bias{};

  double w(int r, int i) const { return weights[static_cast<std::size_t>(r) * latent + i]; }
  friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

struct GazeModel {
  DwnConfig config;
  ThresholdTable thresholds;
  ConnectionMap map;
  LutBank luts;
  LinearHead head;
};

struct GazeSample {
  FloatImage image;
  Vec3 target{0, 0, 1};
  std::string subject;
};

struct Complexity {
  std::int64_t params = 0;
  std::int64_t macs = 0;
  std::int64_t lookups = 0;
  friend bool operator==(const Complexity&, const Complexity&) = default;
};

// Instrumentation for the hard inference path.
struct InferenceCounters {
  std::int64_t lookups = 0;
  std::int64_t macs = 0;
};

struct HeadOutput {
  Vec3 gaze{0, 0, 1};
  double norm = 0;
  bool degenerate = false;
};

inline constexpr double kDegenerateNorm = 1e-8;

// ---------------------------------------------------------------------------
// Small vector helpers

inline double dot(const Vec3& a, const Vec3& b) noexcept { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) noexcept { return std::sqrt(dot(a, a)); }

inline double logistic(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Thresholds

// Linear interpolation between order statistics at position q*(N-1).
inline double quantile_linear(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Quantile levels k/(K+1), k = 1..K.
inline std::vector<double> quantile_levels(int therm_bits) {
  std::vector<double> q(static_cast<std::size_t>(therm_bits));
  for (int k = 0; k < therm_bits; ++k) q[k] = static_cast<double>(k + 1) / (therm_bits + 1);
  return q;
}

// `samples` holds N feature vectors of equal length F.
inline ThresholdFit fit_thresholds(std::span<const FeatureVector> samples, int therm_bits) {
  if (therm_bits < 1) throw ConfigError("therm_bits must be >= 1");
  if (samples.size() < static_cast<std::size_t>(therm_bits) + 1)
    throw DataError("need at least K+1 samples to fit thresholds, got " + std::to_string(samples.size()));
  const std::size_t F = samples.front().size();
  for (std::size_t n = 0; n < samples.size(); ++n)
    if (samples[n].size() != F)
      throw DataError("feature vector " + std::to_string(n) + " has length " + std::to_string(samples[n].size()) +
                      ", expected " + std::to_string(F));

  ThresholdFit fit;
  fit.table.features = static_cast<int>(F);
  fit.table.bits = therm_bits;
  fit.table.tau.resize(F * therm_bits);
  fit.table.fitted = true;
  const auto levels = quantile_levels(therm_bits);
  std::vector<double> column(samples.size());
  for (std::size_t j = 0; j < F; ++j) {
    for (std::size_t n = 0; n < samples.size(); ++n) column[n] = samples[n][j];
    std::sort(column.begin(), column.end());
    if (column.front() == column.back()) fit.degenerate_features.push_back(static_cast<int>(j));
    for (int k = 0; k < therm_bits; ++k) fit.table.tau[j * therm_bits + k] = quantile_linear(column, levels[k]);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Preprocessing and encoding

// tanh, then k x k average pooling, flattened row-major.
inline FeatureVector preprocess(const FloatImage& raw, int input_size, int pool_k) {
  if (raw.width != input_size || raw.height != input_size)
    throw DataError("expected a " + std::to_string(input_size) + "x" + std::to_string(input_size) + " image, got " +
                    std::to_string(raw.width) + "x" + std::to_string(raw.height));
  if (pool_k <= 0 || input_size % pool_k != 0) throw ConfigError("input_size must be a multiple of pool_k");
  const int grid = input_size / pool_k;
  FeatureVector f(static_cast<std::size_t>(grid) * grid, 0.0);
  for (int y = 0; y < input_size; ++y)
    for (int x = 0; x < input_size; ++x) f[(y / pool_k) * grid + x / pool_k] += std::tanh(raw.at(x, y));
  const double inv = 1.0 / (pool_k * pool_k);
  for (auto& v : f) v *= inv;
  return f;
}

inline FeatureVector preprocess(const FloatImage& raw, const DwnConfig& cfg) {
  return preprocess(raw, cfg.input_size, cfg.pool_k);
}

inline void check_features(std::span<const double> f, const ThresholdTable& tau) {
  if (static_cast<int>(f.size()) != tau.features)
    throw DataError("feature vector has length " + std::to_string(f.size()) + ", thresholds expect " +
                    std::to_string(tau.features));
}

inline SoftBits encode_soft(std::span<const double> f, const ThresholdTable& tau, double temperature) {
  if (!(temperature > 0)) throw ConfigError("temperature must be > 0");
  check_features(f, tau);
  SoftBits out(static_cast<std::size_t>(tau.features) * tau.bits);
  for (int j = 0; j < tau.features; ++j)
    for (int k = 0; k < tau.bits; ++k)
      out[j * tau.bits + k] = logistic((f[j] - tau.at(j, k)) / temperature);
  return out;
}

inline BitVector encode_hard(std::span<const double> f, const ThresholdTable& tau) {
  check_features(f, tau);
  BitVector out(static_cast<std::size_t>(tau.features) * tau.bits);
  for (int j = 0; j < tau.features; ++j)
    for (int k = 0; k < tau.bits; ++k) out[j * tau.bits + k] = f[j] >= tau.at(j, k) ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// Connection map and lookup layer

// Each LUT draws addr_bits distinct inputs uniformly from [0, num_bits).
// Inputs may repeat across LUTs.
inline ConnectionMap make_connection_map(std::uint64_t seed, int num_bits, int luts, int addr_bits) {
  if (addr_bits < 1 || addr_bits > 16) throw ConfigError("addr_bits must be in [1, 16]");
  if (addr_bits > num_bits) throw ConfigError("addr_bits exceeds the number of input bits");
  if (luts < 1) throw ConfigError("need at least one LUT");
  ConnectionMap map{luts, addr_bits, num_bits, seed, {}};
  map.index.reserve(static_cast<std::size_t>(luts) * addr_bits);
  const CounterRng rng(seed, /*stream=*/1);
  for (int i = 0; i < luts; ++i) {
    const CounterRng lut_rng = rng.substream(static_cast<std::uint64_t>(i));
    std::uint64_t counter = 0;
    std::vector<std::uint32_t> picked;
    while (static_cast<int>(picked.size()) < addr_bits) {
      const auto b = static_cast<std::uint32_t>(lut_rng.below(counter++, static_cast<std::uint64_t>(num_bits)));
      if (std::find(picked.begin(), picked.end(), b) == picked.end()) picked.push_back(b);
    }
    map.index.insert(map.index.end(), picked.begin(), picked.end());
  }
  return map;
}

inline std::size_t lut_address(std::span<const std::uint8_t> bits, const ConnectionMap& map, int lut) {
  std::size_t a = 0;
  for (const auto b : map.row(lut)) a = (a << 1) | (bits[b] ? 1u : 0u);
  return a;
}

inline LatentVector lut_forward_hard(std::span<const std::uint8_t> bits, const LutBank& luts, const ConnectionMap& map,
                                     InferenceCounters* counters = nullptr) {
  if (static_cast<int>(bits.size()) != map.num_bits)
    throw DataError("bit vector has length " + std::to_string(bits.size()) + ", expected " +
                    std::to_string(map.num_bits));
  LatentVector z(static_cast<std::size_t>(luts.luts));
  for (int i = 0; i < luts.luts; ++i) z[i] = luts.row(i)[lut_address(bits, map, i)];
  if (counters) counters->lookups += luts.luts;
  return z;
}

// Probability of every address of one LUT under independent Bernoulli inputs.
// `out` must hold 2^addr_bits values; index order matches lut_address.
inline void lut_address_weights(std::span<const double> soft, const ConnectionMap& map, int lut, std::span<double> out) {
  out[0] = 1.0;
  std::size_t size = 1;
  for (const auto b : map.row(lut)) {
    const double p = soft[b];
    for (std::size_t idx = size; idx-- > 0;) {
      const double w = out[idx];
      out[2 * idx + 1] = w * p;
      out[2 * idx] = w * (1.0 - p);
    }
    size *= 2;
  }
}

// Expected lookup value under independent Bernoulli bits.
inline LatentVector lut_forward_soft(std::span<const double> soft, const LutBank& luts, const ConnectionMap& map) {
  if (static_cast<int>(soft.size()) != map.num_bits)
    throw DataError("soft bit vector has length " + std::to_string(soft.size()) + ", expected " +
                    std::to_string(map.num_bits));
  LatentVector z(static_cast<std::size_t>(luts.luts));
  std::vector<double> weights(luts.table_size());
  for (int i = 0; i < luts.luts; ++i) {
    lut_address_weights(soft, map, i, weights);
    const auto row = luts.row(i);
    double acc = 0;
    for (std::size_t a = 0; a < weights.size(); ++a) acc += weights[a] * row[a];
    z[i] = acc;
  }
  return z;
}

// ---------------------------------------------------------------------------
// Head, targets and metrics

inline HeadOutput head_forward(std::span<const double> z, const LinearHead& head, InferenceCounters* counters = nullptr) {
  if (static_cast<int>(z.size()) != head.latent)
    throw DataError("latent vector has length " + std::to_string(z.size()) + ", head expects " +
                    std::to_string(head.latent));
  Vec3 y = head.bias;
  for (int r = 0; r < 3; ++r) {
    const double* w = head.weights.data() + static_cast<std::size_t>(r) * head.latent;
    for (int i = 0; i < head.latent; ++i) y[r] += w[i] * z[i];
  }
  if (counters) counters->macs += 3LL * head.latent;
  HeadOutput out;
  out.norm = norm(y);
  if (!(out.norm >= kDegenerateNorm)) {
    out.degenerate = true;
    out.gaze = {0, 0, 1};
    return out;
  }
  for (int r = 0; r < 3; ++r) out.gaze[r] = y[r] / out.norm;
  return out;
}

inline Vec3 normalize_target(const Vec3& g) noexcept {
  constexpr double eps = 1e-8;
  const double n = norm(g);
  if (n < 1e-6) return {0, 0, 1};
  return {g[0] / (n + eps), g[1] / (n + eps), g[2] / (n + eps)};
}

inline double loss(const Vec3& pred, const Vec3& target, double lambda) noexcept {
  const Vec3 d{pred[0] - target[0], pred[1] - target[1], pred[2] - target[2]};
  return lambda * dot(d, d) + (1.0 - lambda) * (1.0 - dot(pred, target));
}

inline double angular_error_deg(const Vec3& pred, const Vec3& target) noexcept {
  const double c = std::clamp(dot(pred, target), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

inline Complexity count_complexity(int features, int therm_bits, int luts, int addr_bits) {
  Complexity c;
  c.params = static_cast<std::int64_t>(features) * therm_bits + (static_cast<std::int64_t>(luts) << addr_bits) +
             (3LL * luts + 3);
  c.macs = 3LL * luts;
  c.lookups = luts;
  return c;
}

inline Complexity count_complexity(const DwnConfig& cfg) {
  return count_complexity(cfg.num_features(), cfg.therm_bits, cfg.num_luts, cfg.addr_bits);
}

inline std::int64_t param_count(const GazeModel& m) {
  return static_cast<std::int64_t>(m.thresholds.tau.size()) + static_cast<std::int64_t>(m.luts.entries.size()) +
         static_cast<std::int64_t>(m.head.weights.size()) + 3;
}

// ---------------------------------------------------------------------------
// Model construction and inference

// LUT entries ~ U(-0.1, 0.1). Head weights ~ U(-0.1, 0.1) with zero bias, so
// initial predictions point in arbitrary directions rather than collapsing onto
// the degenerate-norm guard. Thresholds stay unfitted until fit_thresholds.
inline GazeModel init_model(const DwnConfig& cfg) {
  cfg.validate();
  GazeModel m;
  m.config = cfg;
  m.thresholds.features = cfg.num_features();
  m.thresholds.bits = cfg.therm_bits;
  m.thresholds.tau.assign(static_cast<std::size_t>(cfg.num_bits()), 0.0);
  m.map = make_connection_map(cfg.seed, cfg.num_bits(), cfg.num_luts, cfg.addr_bits);
  m.luts.luts = cfg.num_luts;
  m.luts.addr_bits = cfg.addr_bits;
  m.luts.entries.resize(static_cast<std::size_t>(cfg.num_luts) * cfg.table_size());
  const CounterRng lut_rng(cfg.seed, /*stream=*/2);
  for (std::size_t e = 0; e < m.luts.entries.size(); ++e) m.luts.entries[e] = lut_rng.uniform(e, -0.1, 0.1);
  m.head.latent = cfg.num_luts;
  m.head.weights.resize(3 * static_cast<std::size_t>(cfg.num_luts));
  const CounterRng head_rng(cfg.seed, /*stream=*/3);
  for (std::size_t e = 0; e < m.head.weights.size(); ++e) m.head.weights[e] = head_rng.uniform(e, -0.1, 0.1);
  m.head.bias = {0, 0, 0};
  return m;
}

// Per-feature 8-bit affine grid over the K thresholds (offset = min, step =
// (max - min) / 255). The .dwn export stores exactly this.
struct ThresholdGrid {
  float offset = 0;
  float step = 0;
  std::vector<std::uint8_t> codes;

  double value(int k) const { return static_cast<double>(offset) + codes[k] * static_cast<double>(step); }
};

inline ThresholdGrid threshold_grid(std::span<const double> row) {
  ThresholdGrid g;
  const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
  g.offset = static_cast<float>(*lo);
  g.step = static_cast<float>((*hi - *lo) / 255.0);
  g.codes.assign(row.size(), 0);
  if (g.step > 0)
    for (std::size_t k = 0; k < row.size(); ++k)
      g.codes[k] = static_cast<std::uint8_t>(std::clamp(std::round((row[k] - g.offset) / g.step), 0.0, 255.0));
  return g;
}

// Moves every threshold onto its export grid, so float hard inference and the
// quantized interpreter compare against the same values. Idempotent.
inline void snap_thresholds(ThresholdTable& t) {
  for (int j = 0; j < t.features; ++j) {
    const auto g = threshold_grid(t.row(j));
    for (int k = 0; k < t.bits; ++k) t.tau[static_cast<std::size_t>(j) * t.bits + k] = g.value(k);
  }
}

inline void set_thresholds(GazeModel& m, ThresholdTable table) {
  if (table.features != m.config.num_features() || table.bits != m.config.therm_bits)
    throw DataError("threshold table shape does not match the model configuration");
  m.thresholds = std::move(table);
}

inline HeadOutput predict_features(const GazeModel& m, std::span<const double> f, InferenceCounters* counters = nullptr) {
  const auto bits = encode_hard(f, m.thresholds);
  const auto z = lut_forward_hard(bits, m.luts, m.map, counters);
  return head_forward(z, m.head, counters);
}

// Hard (deployment) inference.
inline HeadOutput predict(const GazeModel& m, const FloatImage& image, InferenceCounters* counters = nullptr) {
  return predict_features(m, preprocess(image, m.config), counters);
}

// Relaxed inference as used during training.
inline HeadOutput predict_soft(const GazeModel& m, const FloatImage& image) {
  const auto soft = encode_soft(preprocess(image, m.config), m.thresholds, m.config.temperature);
  return head_forward(lut_forward_soft(soft, m.luts, m.map), m.head);
}

inline bool all_finite(const GazeModel& m) {
  auto finite = [](const auto& v) { return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }); };
  return finite(m.thresholds.tau) && finite(m.luts.entries) && finite(m.head.weights) && finite(m.head.bias);
}

}  // namespace glance::dwn
