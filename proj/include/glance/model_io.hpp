#pragma once

// Quantized `.dwn` model files and the reference interpreter that runs them.
// Layout (little-endian) is documented in docs/format.md.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "glance/dwn.hpp"
#include "glance/errors.hpp"

namespace glance::io {

inline constexpr char kMagic[4] = {'D', 'W', 'N', '1'};
inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::uint8_t kQuantileLinear = 0;
inline constexpr std::size_t kFixedHeaderBytes = 36;

struct QuantizedHeader {
  std::uint8_t version = kFormatVersion;
  std::uint8_t quantile_rule = kQuantileLinear;
  std::uint16_t input_size = 0;
  std::uint16_t pool_k = 0;
  std::uint16_t therm_bits = 0;
  std::uint16_t num_luts = 0;
  std::uint8_t addr_bits = 0;
  std::uint64_t seed = 0;
  std::uint32_t payload_bytes = 0;
  float head_w_scale = 0;
  float head_c_scale = 0;
  std::vector<float> threshold_offset;  // per feature
  std::vector<float> threshold_step;    // per feature
  std::vector<float> lut_scale;         // per LUT

  int features() const noexcept {
    return pool_k ? (input_size / pool_k) * (input_size / pool_k) : 0;
  }
  std::size_t header_bytes() const noexcept {
    return kFixedHeaderBytes + 8 * threshold_offset.size() + 4 * lut_scale.size();
  }
  friend bool operator==(const QuantizedHeader&, const QuantizedHeader&) = default;
};

struct QuantizedModel {
  QuantizedHeader header;
  std::vector<std::uint8_t> threshold_codes;  // F x K
  std::vector<std::uint8_t> lut_bits;         // L * 2^n bits, LSB-first within each byte
  std::vector<std::int8_t> head_codes;        // W (3 x L, row-major) then c (3)

  bool lut_bit(std::size_t global_index) const {
    return (lut_bits[global_index >> 3] >> (global_index & 7)) & 1u;
  }
  friend bool operator==(const QuantizedModel&, const QuantizedModel&) = default;
};

// F*K threshold codes + L*2^n sign bits + (3L+3) head codes.
inline std::uint64_t payload_size(std::uint64_t features, std::uint64_t therm_bits, std::uint64_t luts,
                                  std::uint64_t addr_bits) {
  return features * therm_bits + ((luts << addr_bits) + 7) / 8 + (3 * luts + 3);
}

inline std::uint64_t payload_size(const dwn::DwnConfig& c) {
  return payload_size(static_cast<std::uint64_t>(c.num_features()), static_cast<std::uint64_t>(c.therm_bits),
                      static_cast<std::uint64_t>(c.num_luts), static_cast<std::uint64_t>(c.addr_bits));
}

namespace detail {

inline std::int8_t quantize_symmetric(double v, double scale) {
  if (scale == 0) return 0;
  const double q = std::round(v / scale);
  return static_cast<std::int8_t>(std::clamp(q, -127.0, 127.0));
}

inline float symmetric_scale(std::span<const double> v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return static_cast<float>(m / 127.0);
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xffu));
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}
  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  void need(std::size_t n) const {
    if (remaining() < n)
      throw ParseError(pos_, "truncated data: need " + std::to_string(n) + " bytes, have " +
                                 std::to_string(remaining()));
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<std::make_unsigned_t<T>>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  float f32() {
    const std::size_t at = pos_;
    const float v = std::bit_cast<float>(le<std::uint32_t>());
    if (!std::isfinite(v)) throw ParseError(at, "non-finite scale");
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Thresholds: per-feature affine 8-bit (min/max of the K thresholds), which
// preserves their order. LUTs: sign bit with per-LUT scale mean|entry|.
// Head: symmetric 8-bit, one scale for W and one for c.
inline QuantizedModel quantize(const dwn::GazeModel& m) {
  const auto& cfg = m.config;
  cfg.validate();
  if (!m.thresholds.fitted) throw DataError("cannot export a model whose thresholds are not fitted");
  if (!dwn::all_finite(m)) throw NumericalError("cannot export a model with non-finite parameters");
  if (cfg.input_size > 0xffff || cfg.num_luts > 0xffff || cfg.therm_bits > 0xffff)
    throw ConfigError("model dimensions exceed the .dwn header field widths");

  QuantizedModel q;
  auto& h = q.header;
  h.input_size = static_cast<std::uint16_t>(cfg.input_size);
  h.pool_k = static_cast<std::uint16_t>(cfg.pool_k);
  h.therm_bits = static_cast<std::uint16_t>(cfg.therm_bits);
  h.num_luts = static_cast<std::uint16_t>(cfg.num_luts);
  h.addr_bits = static_cast<std::uint8_t>(cfg.addr_bits);
  h.seed = cfg.seed;
  h.payload_bytes = static_cast<std::uint32_t>(payload_size(cfg));

  const int F = cfg.num_features();
  const int K = cfg.therm_bits;
  h.threshold_offset.resize(F);
  h.threshold_step.resize(F);
  q.threshold_codes.resize(static_cast<std::size_t>(F) * K);
  for (int j = 0; j < F; ++j) {
    const auto g = dwn::threshold_grid(m.thresholds.row(j));
    h.threshold_offset[j] = g.offset;
    h.threshold_step[j] = g.step;
    std::copy(g.codes.begin(), g.codes.end(), q.threshold_codes.begin() + static_cast<std::ptrdiff_t>(j) * K);
  }

  const std::size_t T = cfg.table_size();
  h.lut_scale.resize(cfg.num_luts);
  q.lut_bits.assign((cfg.num_luts * T + 7) / 8, 0);
  for (int i = 0; i < cfg.num_luts; ++i) {
    const auto row = m.luts.row(i);
    double s = 0;
    for (double v : row) s += std::abs(v);
    h.lut_scale[i] = static_cast<float>(s / static_cast<double>(T));
    for (std::size_t a = 0; a < T; ++a)
      if (row[a] >= 0) {
        const std::size_t g = i * T + a;
        q.lut_bits[g >> 3] |= static_cast<std::uint8_t>(1u << (g & 7));
      }
  }

  h.head_w_scale = detail::symmetric_scale(m.head.weights);
  h.head_c_scale = detail::symmetric_scale(m.head.bias);
  q.head_codes.reserve(m.head.weights.size() + 3);
  for (double w : m.head.weights) q.head_codes.push_back(detail::quantize_symmetric(w, h.head_w_scale));
  for (double c : m.head.bias) q.head_codes.push_back(detail::quantize_symmetric(c, h.head_c_scale));
  return q;
}

inline std::vector<std::uint8_t> serialize(const QuantizedModel& q) {
  const auto& h = q.header;
  detail::Writer w;
  w.bytes(kMagic, 4);
  w.le(h.version);
  w.le(h.quantile_rule);
  w.le(h.input_size);
  w.le(h.pool_k);
  w.le(h.therm_bits);
  w.le(h.num_luts);
  w.le(h.addr_bits);
  w.le(std::uint8_t{0});
  w.le(h.seed);
  w.le(h.payload_bytes);
  w.f32(h.head_w_scale);
  w.f32(h.head_c_scale);
  for (std::size_t j = 0; j < h.threshold_offset.size(); ++j) {
    w.f32(h.threshold_offset[j]);
    w.f32(h.threshold_step[j]);
  }
  for (float s : h.lut_scale) w.f32(s);
  w.bytes(q.threshold_codes.data(), q.threshold_codes.size());
  w.bytes(q.lut_bits.data(), q.lut_bits.size());
  w.bytes(q.head_codes.data(), q.head_codes.size());
  return w.take();
}

inline std::vector<std::uint8_t> export_quantized(const dwn::GazeModel& m) { return serialize(quantize(m)); }

inline QuantizedModel import_quantized(std::span<const std::uint8_t> bytes) {
  detail::Reader r(bytes);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ParseError(0, "bad magic (expected \"DWN1\")");
  QuantizedModel q;
  auto& h = q.header;
  h.version = r.le<std::uint8_t>();
  if (h.version != kFormatVersion) throw ParseError(4, "unsupported format version " + std::to_string(h.version));
  h.quantile_rule = r.le<std::uint8_t>();
  if (h.quantile_rule != kQuantileLinear) throw ParseError(5, "unknown quantile rule");
  h.input_size = r.le<std::uint16_t>();
  h.pool_k = r.le<std::uint16_t>();
  h.therm_bits = r.le<std::uint16_t>();
  h.num_luts = r.le<std::uint16_t>();
  h.addr_bits = r.le<std::uint8_t>();
  if (r.le<std::uint8_t>() != 0) throw ParseError(15, "reserved byte must be zero");
  h.seed = r.le<std::uint64_t>();
  const std::size_t payload_field = r.offset();
  h.payload_bytes = r.le<std::uint32_t>();

  if (h.input_size == 0 || h.pool_k == 0 || h.input_size % h.pool_k != 0)
    throw ParseError(6, "input_size must be a positive multiple of pool_k");
  if (h.therm_bits == 0) throw ParseError(10, "therm_bits must be positive");
  if (h.num_luts == 0) throw ParseError(12, "num_luts must be positive");
  if (h.addr_bits == 0 || h.addr_bits > 16) throw ParseError(14, "addr_bits must be in [1, 16]");
  const std::uint64_t F = static_cast<std::uint64_t>(h.features());
  const std::uint64_t B = F * h.therm_bits;
  if (F > (1u << 24) || B > (1u << 26)) throw ParseError(6, "dimension overflow");
  if (h.addr_bits > B) throw ParseError(14, "addr_bits exceeds the number of thermometer bits");
  const std::uint64_t expected = payload_size(F, h.therm_bits, h.num_luts, h.addr_bits);
  if (expected != h.payload_bytes)
    throw ParseError(payload_field, "length mismatch: header declares " + std::to_string(h.payload_bytes) +
                                        " payload bytes, dimensions imply " + std::to_string(expected));

  h.head_w_scale = r.f32();
  h.head_c_scale = r.f32();
  h.threshold_offset.resize(F);
  h.threshold_step.resize(F);
  for (std::uint64_t j = 0; j < F; ++j) {
    h.threshold_offset[j] = r.f32();
    const std::size_t at = r.offset();
    h.threshold_step[j] = r.f32();
    if (h.threshold_step[j] < 0) throw ParseError(at, "negative threshold step");
  }
  h.lut_scale.resize(h.num_luts);
  for (auto& s : h.lut_scale) s = r.f32();

  if (r.remaining() != h.payload_bytes)
    throw ParseError(r.offset(), "length mismatch: expected " + std::to_string(h.payload_bytes) +
                                     " payload bytes, found " + std::to_string(r.remaining()));
  const auto thr = r.take(static_cast<std::size_t>(B));
  q.threshold_codes.assign(thr.begin(), thr.end());
  const std::size_t lut_bytes = ((static_cast<std::size_t>(h.num_luts) << h.addr_bits) + 7) / 8;
  const auto lb = r.take(lut_bytes);
  q.lut_bits.assign(lb.begin(), lb.end());
  const auto hc = r.take(3 * static_cast<std::size_t>(h.num_luts) + 3);
  q.head_codes.resize(hc.size());
  std::memcpy(q.head_codes.data(), hc.data(), hc.size());
  return q;
}

inline dwn::DwnConfig config_of(const QuantizedModel& q) {
  dwn::DwnConfig c;
  c.input_size = q.header.input_size;
  c.pool_k = q.header.pool_k;
  c.therm_bits = q.header.therm_bits;
  c.num_luts = q.header.num_luts;
  c.addr_bits = q.header.addr_bits;
  c.seed = q.header.seed;
  return c;
}

inline double dequantized_threshold(const QuantizedModel& q, int j, int k) {
  const auto& h = q.header;
  return static_cast<double>(h.threshold_offset[j]) +
         q.threshold_codes[static_cast<std::size_t>(j) * h.therm_bits + k] * static_cast<double>(h.threshold_step[j]);
}

// Float model carrying the dequantized values; its hard inference matches
// quantized_forward.
inline dwn::GazeModel dequantize(const QuantizedModel& q) {
  dwn::GazeModel m;
  m.config = config_of(q);
  const int F = m.config.num_features();
  const int K = m.config.therm_bits;
  const int L = m.config.num_luts;
  m.thresholds = {F, K, std::vector<double>(static_cast<std::size_t>(F) * K), true};
  for (int j = 0; j < F; ++j)
    for (int k = 0; k < K; ++k) m.thresholds.tau[static_cast<std::size_t>(j) * K + k] = dequantized_threshold(q, j, k);
  m.map = dwn::make_connection_map(m.config.seed, m.config.num_bits(), L, m.config.addr_bits);
  m.luts = {L, m.config.addr_bits, std::vector<double>(static_cast<std::size_t>(L) * m.config.table_size())};
  const std::size_t T = m.config.table_size();
  for (int i = 0; i < L; ++i)
    for (std::size_t a = 0; a < T; ++a)
      m.luts.entries[i * T + a] = (q.lut_bit(i * T + a) ? 1.0 : -1.0) * static_cast<double>(q.header.lut_scale[i]);
  m.head.latent = L;
  m.head.weights.resize(3 * static_cast<std::size_t>(L));
  for (std::size_t e = 0; e < m.head.weights.size(); ++e)
    m.head.weights[e] = q.head_codes[e] * static_cast<double>(q.header.head_w_scale);
  for (int r = 0; r < 3; ++r)
    m.head.bias[r] = q.head_codes[3 * static_cast<std::size_t>(L) + r] * static_cast<double>(q.header.head_c_scale);
  return m;
}

// Reference interpreter over the stored codes. The encoder compares an 8-bit
// feature code against the threshold codes instead of float thresholds.
class QuantizedInterpreter {
 public:
  explicit QuantizedInterpreter(QuantizedModel q)
      : q_(std::move(q)),
        cfg_(config_of(q_)),
        map_(dwn::make_connection_map(cfg_.seed, cfg_.num_bits(), cfg_.num_luts, cfg_.addr_bits)) {}

  const QuantizedModel& model() const noexcept { return q_; }
  const dwn::DwnConfig& config() const noexcept { return cfg_; }

  // Feature code: floor((f - offset) / step), clamped to [-1, 256]; bit k is set
  // iff code >= threshold code k, i.e. f >= offset + code_k * step.
  int feature_code(int j, double f) const {
    const double off = q_.header.threshold_offset[j];
    const double step = q_.header.threshold_step[j];
    if (step == 0) return f >= off ? 0 : -1;
    const double c = std::floor((f - off) / step);
    return static_cast<int>(std::clamp(c, -1.0, 256.0));
  }

  dwn::HeadOutput forward(const FloatImage& image, dwn::InferenceCounters* counters = nullptr) const {
    const auto f = dwn::preprocess(image, cfg_);
    const int F = cfg_.num_features();
    const int K = cfg_.therm_bits;
    dwn::BitVector bits(static_cast<std::size_t>(F) * K);
    for (int j = 0; j < F; ++j) {
      const int code = feature_code(j, f[j]);
      for (int k = 0; k < K; ++k)
        bits[static_cast<std::size_t>(j) * K + k] = code >= q_.threshold_codes[static_cast<std::size_t>(j) * K + k];
    }
    const int L = cfg_.num_luts;
    const std::size_t T = cfg_.table_size();
    std::vector<double> z(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) {
      const std::size_t a = dwn::lut_address(bits, map_, i);
      z[i] = (q_.lut_bit(i * T + a) ? 1.0 : -1.0) * static_cast<double>(q_.header.lut_scale[i]);
    }
    if (counters) counters->lookups += L;
    dwn::Vec3 y{};
    const double ws = q_.header.head_w_scale;
    for (int r = 0; r < 3; ++r) {
      double acc = 0;
      for (int i = 0; i < L; ++i) acc += q_.head_codes[static_cast<std::size_t>(r) * L + i] * z[i];
      y[r] = acc * ws + q_.head_codes[3 * static_cast<std::size_t>(L) + r] * static_cast<double>(q_.header.head_c_scale);
    }
    if (counters) counters->macs += 3LL * L;
    dwn::HeadOutput out;
    out.norm = dwn::norm(y);
    if (!(out.norm >= dwn::kDegenerateNorm)) {
      out.degenerate = true;
      return out;
    }
    for (int r = 0; r < 3; ++r) out.gaze[r] = y[r] / out.norm;
    return out;
  }

 private:
  QuantizedModel q_;
  dwn::DwnConfig cfg_;
  dwn::ConnectionMap map_;
};

inline dwn::HeadOutput quantized_forward(const QuantizedModel& q, const FloatImage& image,
                                         dwn::InferenceCounters* counters = nullptr) {
  return QuantizedInterpreter(q).forward(image, counters);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& p, std::span<const std::uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + p.string());
}

}  // namespace glance::io
