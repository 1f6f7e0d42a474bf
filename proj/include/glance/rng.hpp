#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace glance {

// Stateless counter-based generator: every draw is a pure function of
// (seed, stream, counter), so results never depend on call order or on the
// standard library's distribution implementations.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix(key_ + 0x9e3779b97f4a7c15ULL * (counter + 1));
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  constexpr double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double lo, double hi) const noexcept {
    return lo + (hi - lo) * uniform(counter);
  }

  // Uniform integer in [0, n) by rejection, drawing counters 2*counter+r.
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const noexcept {
    const std::uint64_t limit = n == 0 ? 0 : (~std::uint64_t{0} / n) * n;
    for (std::uint64_t r = 0;; ++r) {
      const std::uint64_t x = bits(counter * 64 + r);
      if (x < limit) return x % n;
    }
  }

  // Standard normal via Box-Muller on two consecutive counters.
  double normal(std::uint64_t counter) const noexcept {
    const double u1 = 1.0 - uniform(2 * counter);  // (0, 1]
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  CounterRng substream(std::uint64_t stream) const noexcept {
    CounterRng r(0);
    r.key_ = mix(key_ ^ mix(stream + 0x94d049bb133111ebULL));
    return r;
  }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

}  // namespace glance
