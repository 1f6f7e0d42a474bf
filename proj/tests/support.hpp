#pragma once

// Shared fixtures for the test binaries.

#include <cmath>
#include <cstdint>
#include <vector>

#include "glance/glance.hpp"

namespace glance::testing {

// Small model with random thresholds, LUTs and head.
inline dwn::GazeModel random_small_model(std::uint64_t seed, int input = 8, int pool = 2, int K = 3, int L = 5,
                                         int n = 3) {
  dwn::DwnConfig c;
  c.input_size = input;
  c.pool_k = pool;
  c.therm_bits = K;
  c.num_luts = L;
  c.addr_bits = n;
  c.seed = seed;
  auto m = dwn::init_model(c);
  const CounterRng rng(seed, 77);
  dwn::ThresholdTable t{c.num_features(), K, std::vector<double>(static_cast<std::size_t>(c.num_bits())), true};
  std::uint64_t ctr = 0;
  for (int j = 0; j < t.features; ++j) {
    double v = rng.uniform(ctr++, -0.8, -0.4);
    for (int k = 0; k < K; ++k) {
      t.tau[static_cast<std::size_t>(j) * K + k] = v;
      v += rng.uniform(ctr++, 0.1, 0.4);
    }
  }
  dwn::set_thresholds(m, t);
  for (auto& e : m.luts.entries) e = rng.uniform(ctr++, -1, 1);
  for (auto& w : m.head.weights) w = rng.uniform(ctr++, -1, 1);
  for (auto& b : m.head.bias) b = rng.uniform(ctr++, -0.5, 0.5) + 0.0;
  m.head.bias[2] += 1.0;
  return m;
}

inline FloatImage random_image(std::uint64_t seed, std::uint64_t stream, int size) {
  const CounterRng rng(seed, stream);
  FloatImage img(size, size);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = rng.uniform(i, -1, 1);
  return img;
}

inline dwn::Vec3 random_unit_forward(const CounterRng& rng, std::uint64_t ctr) {
  return dwn::normalize_target({rng.uniform(ctr, -0.5, 0.5), rng.uniform(ctr + 1, -0.5, 0.5), 1.0});
}

// The seeded synthetic fixture and a model trained on all of it (computed once).
inline const std::vector<dwn::GazeSample>& gaze_fixture() {
  static const auto data = make_synthetic_gaze(SyntheticGazeConfig{});
  return data;
}

inline const dwn::GazeModel& trained_fixture_model() {
  static const dwn::GazeModel model = [] {
    auto m = dwn::init_model(dwn::DwnConfig{});
    dwn::fit_model_thresholds(m, gaze_fixture());
    auto st = dwn::make_adam_state(m);
    const auto td = dwn::prepare_training_data(m, gaze_fixture());
    for (int e = 0; e < m.config.epochs; ++e) dwn::run_epoch(m, td, st, e);
    return m;
  }();
  return model;
}

}  // namespace glance::testing
