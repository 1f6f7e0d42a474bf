#pragma once

// Gradient computation and AdamW training for the weightless gaze estimator.
// Thresholds and the connection map are frozen; LUT entries and the linear
// head are trained through the relaxed (expected-lookup) forward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "glance/dwn.hpp"

namespace glance::dwn {

// A sample after preprocessing and soft encoding (both fixed during training).
struct EncodedSample {
  SoftBits soft;
  Vec3 target{0, 0, 1};
};

struct Gradients {
  std::vector<double> luts;
  std::vector<double> weights;
  Vec3 bias{};
  double mean_loss = 0;
  std::size_t used = 0;
  std::size_t skipped = 0;  // samples hitting the degenerate-norm guard

  double squared_norm() const {
    double s = 0;
    for (double g : luts) s += g * g;
    for (double g : weights) s += g * g;
    for (double g : bias) s += g * g;
    return s;
  }
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<double> m_luts, v_luts, m_weights, v_weights;
  Vec3 m_bias{}, v_bias{};

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct StepResult {
  double mean_loss = 0;
  std::size_t skipped = 0;
  double grad_norm = 0;  // before clipping
};

inline EncodedSample encode_sample(const GazeModel& m, const GazeSample& s) {
  if (!m.thresholds.fitted) throw DataError("thresholds must be fitted before encoding samples");
  return {encode_soft(preprocess(s.image, m.config), m.thresholds, m.config.temperature), normalize_target(s.target)};
}

inline std::vector<EncodedSample> encode_samples(const GazeModel& m, std::span<const GazeSample> samples) {
  std::vector<EncodedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(encode_sample(m, s));
  return out;
}

// Mean relaxed loss over samples whose head output is not degenerate.
inline double batch_loss(const GazeModel& m, std::span<const EncodedSample> batch) {
  double total = 0;
  std::size_t used = 0;
  for (const auto& s : batch) {
    const auto out = head_forward(lut_forward_soft(s.soft, m.luts, m.map), m.head);
    if (out.degenerate) continue;
    total += loss(out.gaze, s.target, m.config.loss_lambda);
    ++used;
  }
  return used ? total / static_cast<double>(used) : 0.0;
}

// Analytic gradient of batch_loss with respect to LUT entries, W and c.
inline Gradients compute_gradients(const GazeModel& m, std::span<const EncodedSample> batch) {
  const int L = m.luts.luts;
  const std::size_t T = m.luts.table_size();
  const double lambda = m.config.loss_lambda;
  Gradients g;
  g.luts.assign(m.luts.entries.size(), 0.0);
  g.weights.assign(m.head.weights.size(), 0.0);

  std::vector<double> address_weights(static_cast<std::size_t>(L) * T);
  std::vector<double> z(static_cast<std::size_t>(L));
  double total = 0;
  for (const auto& s : batch) {
    for (int i = 0; i < L; ++i) {
      std::span<double> w(address_weights.data() + i * T, T);
      lut_address_weights(s.soft, m.map, i, w);
      const auto row = m.luts.row(i);
      double acc = 0;
      for (std::size_t a = 0; a < T; ++a) acc += w[a] * row[a];
      z[i] = acc;
    }
    const auto out = head_forward(z, m.head);
    if (out.degenerate) {
      ++g.skipped;
      continue;
    }
    const Vec3& gh = out.gaze;
    const Vec3& gt = s.target;
    total += loss(gh, gt, lambda);
    ++g.used;

    // dL/dg_hat, then through y / |y|: (I - g g^T) / |y|.
    Vec3 dg;
    for (int r = 0; r < 3; ++r) dg[r] = 2.0 * lambda * (gh[r] - gt[r]) - (1.0 - lambda) * gt[r];
    const double proj = dot(gh, dg);
    Vec3 dy;
    for (int r = 0; r < 3; ++r) dy[r] = (dg[r] - gh[r] * proj) / out.norm;

    for (int r = 0; r < 3; ++r) {
      g.bias[r] += dy[r];
      double* gw = g.weights.data() + static_cast<std::size_t>(r) * L;
      for (int i = 0; i < L; ++i) gw[i] += dy[r] * z[i];
    }
    for (int i = 0; i < L; ++i) {
      const double dz = dy[0] * m.head.w(0, i) + dy[1] * m.head.w(1, i) + dy[2] * m.head.w(2, i);
      if (dz == 0.0) continue;
      double* gl = g.luts.data() + i * T;
      const double* w = address_weights.data() + i * T;
      for (std::size_t a = 0; a < T; ++a) gl[a] += dz * w[a];
    }
  }
  if (g.used > 0) {
    const double inv = 1.0 / static_cast<double>(g.used);
    for (auto& v : g.luts) v *= inv;
    for (auto& v : g.weights) v *= inv;
    for (auto& v : g.bias) v *= inv;
    g.mean_loss = total * inv;
  }
  return g;
}

inline AdamState make_adam_state(const GazeModel& m) {
  AdamState s;
  s.m_luts.assign(m.luts.entries.size(), 0.0);
  s.v_luts.assign(m.luts.entries.size(), 0.0);
  s.m_weights.assign(m.head.weights.size(), 0.0);
  s.v_weights.assign(m.head.weights.size(), 0.0);
  return s;
}

namespace detail {

inline void adamw_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                         std::span<double> v, const AdamState& s, double lr, double wd, double scale) {
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] * scale;
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
    const double mh = m[i] / bc1;
    const double vh = v[i] / bc2;
    params[i] -= lr * (mh / (std::sqrt(vh) + s.eps) + wd * params[i]);
  }
}

}  // namespace detail

// One AdamW step with global-norm gradient clipping on an encoded batch.
inline StepResult train_step(GazeModel& m, std::span<const EncodedSample> batch, AdamState& state,
                             std::size_t batch_index = 0) {
  if (batch.empty()) throw DataError("train_step needs a nonempty batch");
  if (state.m_luts.size() != m.luts.entries.size() || state.m_weights.size() != m.head.weights.size())
    throw DataError("optimizer state does not match the model dimensions");
  const auto g = compute_gradients(m, batch);
  if (!std::isfinite(g.mean_loss) || !std::isfinite(g.squared_norm()))
    throw NumericalError("non-finite loss in batch " + std::to_string(batch_index));

  StepResult r;
  r.mean_loss = g.mean_loss;
  r.skipped = g.skipped;
  r.grad_norm = std::sqrt(g.squared_norm());
  const double scale = r.grad_norm > m.config.grad_clip ? m.config.grad_clip / r.grad_norm : 1.0;

  ++state.step;
  const double lr = m.config.learning_rate;
  const double wd = m.config.weight_decay;
  detail::adamw_update(m.luts.entries, g.luts, state.m_luts, state.v_luts, state, lr, wd, scale);
  detail::adamw_update(m.head.weights, g.weights, state.m_weights, state.v_weights, state, lr, wd, scale);
  detail::adamw_update(m.head.bias, g.bias, state.m_bias, state.v_bias, state, lr, wd, scale);
  return r;
}

inline StepResult train_step(GazeModel& m, std::span<const GazeSample> batch, AdamState& state,
                             std::size_t batch_index = 0) {
  const auto encoded = encode_samples(m, batch);
  return train_step(m, std::span<const EncodedSample>(encoded), state, batch_index);
}

// Deterministic per-epoch shuffle (Fisher-Yates on a counter-based stream).
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const CounterRng rng(seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i, i)]);
  return order;
}

// Geometric schedule from temperature to temperature_final.
inline double temperature_at(const DwnConfig& cfg, int epoch) {
  if (cfg.epochs <= 1 || cfg.temperature_final == cfg.temperature) return cfg.temperature;
  const double frac = std::clamp(static_cast<double>(epoch) / (cfg.epochs - 1), 0.0, 1.0);
  return cfg.temperature * std::pow(cfg.temperature_final / cfg.temperature, frac);
}

inline bool binarize_phase(const DwnConfig& cfg, int epoch) { return epoch >= cfg.epochs - cfg.binarize_epochs; }

// Projects every LUT onto {-s, +s} with s = mean |entry| of that LUT; the sign
// rule (entry >= 0 -> +s) is the one used by the 1-bit export.
inline void binarize_luts(LutBank& luts) {
  for (int i = 0; i < luts.luts; ++i) {
    auto row = luts.row(i);
    double s = 0;
    for (double v : row) s += std::abs(v);
    s /= static_cast<double>(row.size());
    for (auto& v : row) v = v >= 0 ? s : -s;
  }
}

// Preprocessed features are cached; soft bits are re-encoded per epoch as the
// temperature changes.
struct TrainingData {
  std::vector<FeatureVector> features;
  std::vector<Vec3> targets;
};

inline TrainingData prepare_training_data(const GazeModel& m, std::span<const GazeSample> samples) {
  TrainingData d;
  d.features.reserve(samples.size());
  d.targets.reserve(samples.size());
  for (const auto& s : samples) {
    d.features.push_back(preprocess(s.image, m.config));
    d.targets.push_back(normalize_target(s.target));
  }
  return d;
}

inline std::vector<EncodedSample> encode_at(const GazeModel& m, const TrainingData& d, double temperature) {
  if (!m.thresholds.fitted) throw DataError("thresholds must be fitted before encoding samples");
  std::vector<EncodedSample> out;
  out.reserve(d.features.size());
  for (std::size_t i = 0; i < d.features.size(); ++i)
    out.push_back({encode_soft(d.features[i], m.thresholds, temperature), d.targets[i]});
  return out;
}

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0;
  double temperature = 0;
  std::size_t skipped = 0;
};

// Runs one epoch of minibatch training and returns the sample-weighted mean loss.
inline EpochStats train_epoch(GazeModel& m, std::span<const EncodedSample> data, AdamState& state, int epoch,
                              bool binarize = false) {
  if (data.empty()) throw DataError("training set is empty");
  const auto order = epoch_order(data.size(), m.config.seed, epoch);
  const auto bs = static_cast<std::size_t>(m.config.batch_size);
  std::vector<EncodedSample> batch;
  EpochStats stats{epoch, 0, 0, 0};
  double weighted = 0;
  std::size_t counted = 0;
  for (std::size_t start = 0, b = 0; start < order.size(); start += bs, ++b) {
    batch.clear();
    for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) batch.push_back(data[order[i]]);
    const auto r = train_step(m, std::span<const EncodedSample>(batch), state, b);
    if (binarize) binarize_luts(m.luts);
    const std::size_t used = batch.size() - r.skipped;
    weighted += r.mean_loss * static_cast<double>(used);
    counted += used;
    stats.skipped += r.skipped;
  }
  stats.mean_loss = counted ? weighted / static_cast<double>(counted) : 0.0;
  return stats;
}

// Runs epoch `epoch` of the configured schedule.
inline EpochStats run_epoch(GazeModel& m, const TrainingData& d, AdamState& state, int epoch) {
  const double t = temperature_at(m.config, epoch);
  const auto encoded = encode_at(m, d, t);
  auto stats = train_epoch(m, encoded, state, epoch, binarize_phase(m.config, epoch));
  stats.temperature = t;
  return stats;
}

struct EvalStats {
  double mean_deg = 0;
  double median_deg = 0;
  std::size_t count = 0;
  std::size_t degenerate = 0;
};

inline EvalStats summarize_errors(std::vector<double> errors, std::size_t degenerate = 0) {
  EvalStats s;
  s.count = errors.size();
  s.degenerate = degenerate;
  if (errors.empty()) return s;
  s.mean_deg = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
  std::sort(errors.begin(), errors.end());
  const std::size_t n = errors.size();
  s.median_deg = n % 2 ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
  return s;
}

// Mean angular error of hard inference.
inline EvalStats evaluate(const GazeModel& m, std::span<const GazeSample> samples) {
  std::vector<double> errors;
  std::size_t degenerate = 0;
  errors.reserve(samples.size());
  for (const auto& s : samples) {
    const auto out = predict(m, s.image);
    if (out.degenerate) ++degenerate;
    errors.push_back(angular_error_deg(out.gaze, normalize_target(s.target)));
  }
  return summarize_errors(std::move(errors), degenerate);
}

// Fits thresholds on the given samples' features and installs them in the model.
inline ThresholdFit fit_model_thresholds(GazeModel& m, std::span<const GazeSample> samples) {
  std::vector<FeatureVector> features;
  features.reserve(samples.size());
  for (const auto& s : samples) features.push_back(preprocess(s.image, m.config));
  auto fit = fit_thresholds(features, m.config.therm_bits);
  snap_thresholds(fit.table);
  set_thresholds(m, fit.table);
  return fit;
}

}  // namespace glance::dwn
