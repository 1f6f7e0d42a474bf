#include <gtest/gtest.h>

#include "support.hpp"

using namespace glance;
using namespace glance::attention;

namespace {

const IRect kFrame{0, 0, 640, 480};

roi::RoiSet random_frame_rois(const CounterRng& rng, std::uint64_t t) {
  roi::RoiSet out;
  const int n = static_cast<int>(rng.below(100 * t, 4));
  for (int i = 0; i < n; ++i) {
    const auto c = 100 * t + 4 * i + 1;
    out.push_back({rng.uniform(c, 0, 640), rng.uniform(c + 1, 0, 480), rng.uniform(c + 2, 20, 90), 1.0, 0});
  }
  return out;
}

}  // namespace

TEST(Temporal, WindowOneEqualsPerFrameUnion) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const CounterRng rng(s, 31);
    PolicyConfig cfg;
    cfg.window = 1;
    cfg.lambda = 0.5 + 0.5 * rng.uniform(999);
    auto st = make_state(cfg);
    for (std::uint64_t t = 0; t < 20; ++t) {
      const auto rois = random_frame_rois(rng, t);
      temporal_update(st, rois);
      EXPECT_EQ(st.mask(kFrame).rects(), roi::spatial_union(rois, kFrame).rects());
    }
  }
}

TEST(Temporal, DecayAndExpiry) {
  PolicyConfig cfg;
  cfg.lambda = 0.5;
  cfg.w_min = 0.2;
  auto st = make_state(cfg);
  const roi::RoiSet one{{100, 100, 48, 1, 0}};
  temporal_update(st, one);
  temporal_update(st, {});
  ASSERT_EQ(st.regions.size(), 1u);
  EXPECT_DOUBLE_EQ(st.regions[0].weight, 0.5);
  temporal_update(st, {});
  EXPECT_DOUBLE_EQ(st.regions[0].weight, 0.25);
  temporal_update(st, {});  // 0.125 <= w_min
  EXPECT_TRUE(st.regions.empty());
}

TEST(Temporal, WindowDropsByAge) {
  PolicyConfig cfg;
  cfg.window = 3;
  auto st = make_state(cfg);
  const roi::RoiSet one{{100, 100, 48, 1, 0}};
  temporal_update(st, one);
  temporal_update(st, {});
  temporal_update(st, {});
  EXPECT_EQ(st.regions.size(), 1u);
  temporal_update(st, {});
  EXPECT_TRUE(st.regions.empty());
}

TEST(Temporal, PureAccumulationIsMonotone) {
  const CounterRng rng(5, 32);
  auto st = make_state(PolicyConfig{});
  roi::RegionMask prev;
  for (std::uint64_t t = 0; t < 30; ++t) {
    temporal_update(st, random_frame_rois(rng, t));
    const auto m = st.mask(kFrame);
    EXPECT_TRUE(prev.subset_of(m));
    prev = m;
  }
}

TEST(Temporal, PostRunDecay) {
  PolicyConfig cfg;
  cfg.lambda_post = 0.5;
  cfg.w_min = 0.3;
  auto st = make_state(cfg);
  const roi::RoiSet one{{100, 100, 48, 1, 0}};
  temporal_update(st, one);
  decay_after_run(st);
  EXPECT_DOUBLE_EQ(st.regions[0].weight, 0.5);
  decay_after_run(st);
  EXPECT_TRUE(st.regions.empty());
}

TEST(Refresh, PeriodAndBudget) {
  PolicyConfig cfg;
  cfg.period = 4;
  cfg.budget = 1000;
  EXPECT_TRUE(should_refresh(0, 0, cfg));
  EXPECT_FALSE(should_refresh(1, 1000, cfg));
  EXPECT_TRUE(should_refresh(1, 1001, cfg));
  EXPECT_TRUE(should_refresh(8, 0, cfg));
  cfg.period = 0;
  EXPECT_THROW(should_refresh(3, 0, cfg), ConfigError);
}

TEST(Refresh, RecountMatchesBruteForce) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const CounterRng rng(s, 33);
    PolicyConfig cfg;
    cfg.period = 1 + static_cast<int>(rng.below(0, 6));
    cfg.budget = rng.uniform(1, 2000, 20000);
    auto st = make_state(cfg);
    std::vector<TraceEntry> trace;
    for (std::uint64_t t = 0; t < 40; ++t) {
      temporal_update(st, random_frame_rois(rng, t));
      const auto area = st.mask(kFrame).total_area();
      trace.push_back({st.t, area, should_refresh(st, kFrame), false, 0});
    }
    int brute = 0;
    for (const auto& e : trace) brute += (e.t % cfg.period == 0 || e.union_area > cfg.budget) ? 1 : 0;
    EXPECT_EQ(recount_refreshes(trace, cfg), brute);
    EXPECT_EQ(policy_metrics(trace).refresh_count, brute);
  }
}

TEST(Metrics, MeanMosaicAreaOverRuns) {
  const std::vector<TraceEntry> trace{{0, 10, true, true, 100}, {1, 10, false, false, 0}, {2, 10, true, true, 300},
                                      {3, 0, true, false, 0}};
  const auto m = policy_metrics(trace);
  EXPECT_EQ(m.frames, 4);
  EXPECT_EQ(m.refresh_count, 3);
  EXPECT_DOUBLE_EQ(m.mean_mosaic_area, 200);
}

TEST(Config, Validation) {
  PolicyConfig c;
  c.lambda = 0;
  EXPECT_THROW(make_state(c), ConfigError);
  c = {};
  c.window = 0;
  EXPECT_THROW(make_state(c), ConfigError);
  c = {};
  c.budget = -1;
  EXPECT_THROW(make_state(c), ConfigError);
}
