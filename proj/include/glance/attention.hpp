#pragma once

// Temporal attention accumulation: a weighted region set standing for the
// decayed union of recent per-frame ROI unions, plus the refresh trigger.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "glance/errors.hpp"
#include "glance/roi.hpp"

namespace glance::attention {

inline constexpr int kUnboundedWindow = std::numeric_limits<int>::max();

struct PolicyConfig {
  double lambda = 1.0;       // per-frame decay
  double lambda_post = 1.0;  // decay applied right after a detector run
  double w_min = 0.1;        // regions at or below this weight are dropped
  int window = kUnboundedWindow;  // K, in frames
  int period = 1;                 // R, in frames
  double budget = std::numeric_limits<double>::infinity();  // B, pixels^2

  void validate() const {
    if (!(lambda > 0 && lambda <= 1)) throw ConfigError("policy.lambda must be in (0, 1]");
    if (!(lambda_post > 0 && lambda_post <= 1)) throw ConfigError("policy.lambda_post must be in (0, 1]");
    if (!(w_min >= 0 && w_min < 1)) throw ConfigError("policy.w_min must be in [0, 1)");
    if (window < 1) throw ConfigError("policy.K must be >= 1");
    if (period < 1) throw ConfigError("policy.R must be >= 1");
    if (!(budget > 0)) throw ConfigError("policy.B must be positive");
  }
};

struct TemporalState {
  PolicyConfig config;
  roi::RoiSet regions;
  int t = -1;  // index of the last update; -1 before the first frame

  roi::RegionMask mask(const IRect& frame) const { return roi::spatial_union(regions, frame); }
};

inline TemporalState make_state(const PolicyConfig& cfg) {
  cfg.validate();
  return TemporalState{cfg, {}, -1};
}

namespace detail {

inline void drop_stale(TemporalState& s) {
  const auto& c = s.config;
  std::erase_if(s.regions, [&](const roi::Roi& r) {
    const long long age = static_cast<long long>(s.t) - r.born_t;
    return r.weight <= c.w_min || age >= c.window;
  });
}

}  // namespace detail

// U_t = lambda * U_{t-1} ∪ S_t. Existing regions decay and age first; the new
// ROIs enter with weight 1 at the new frame index.
inline void temporal_update(TemporalState& s, std::span<const roi::Roi> incoming) {
  ++s.t;
  for (auto& r : s.regions) r.weight *= s.config.lambda;
  detail::drop_stale(s);
  for (roi::Roi r : incoming) {
    r.weight = 1.0;
    r.born_t = s.t;
    s.regions.push_back(r);
  }
}

inline bool should_refresh(int t, std::int64_t union_area, const PolicyConfig& c) {
  if (c.period < 1) throw ConfigError("policy.R must be >= 1");
  return t % c.period == 0 || static_cast<double>(union_area) > c.budget;
}

inline bool should_refresh(const TemporalState& s, const IRect& frame) {
  return should_refresh(s.t, s.mask(frame).total_area(), s.config);
}

inline void decay_after_run(TemporalState& s) {
  if (s.config.lambda_post == 1.0) return;
  for (auto& r : s.regions) r.weight *= s.config.lambda_post;
  detail::drop_stale(s);
}

struct TraceEntry {
  int t = 0;
  std::int64_t union_area = 0;   // |U_t|
  bool refreshed = false;         // trigger indicator
  bool ran = false;               // detector actually invoked (nonempty mask)
  std::int64_t mosaic_area = 0;   // |M_t|, 0 when no run
};

struct PolicyMetrics {
  int frames = 0;
  int refresh_count = 0;
  double mean_mosaic_area = 0;  // over frames with a detector run
};

inline PolicyMetrics policy_metrics(std::span<const TraceEntry> trace) {
  PolicyMetrics m;
  m.frames = static_cast<int>(trace.size());
  double sum = 0;
  int runs = 0;
  for (const auto& e : trace) {
    m.refresh_count += e.refreshed ? 1 : 0;
    if (e.ran) {
      ++runs;
      sum += static_cast<double>(e.mosaic_area);
    }
  }
  if (runs > 0) m.mean_mosaic_area = sum / runs;
  return m;
}

// Recomputes the trigger indicator from the stored areas alone.
inline int recount_refreshes(std::span<const TraceEntry> trace, const PolicyConfig& c) {
  int n = 0;
  for (const auto& e : trace) n += should_refresh(e.t, e.union_area, c) ? 1 : 0;
  return n;
}

}  // namespace glance::attention
