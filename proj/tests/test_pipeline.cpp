#include <algorithm>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace glance;
using namespace glance::sim;

namespace {

// Area-based IoU written out independently of the library.
double ref_iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

SimConfig small_config() {
  SimConfig c;
  c.seed = 3;
  c.frames = 30;
  c.roi.count = 3;
  c.roi.hit_probability = 0.7;
  c.policy.period = 3;
  c.sweep.counts = {1, 2, 4, 8, 16};
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / "glance_test_pipeline" / name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Metric, AccuracyMatchesAllPairsOracle) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const CounterRng rng(s, 51);
    std::uint64_t c = 0;
    std::vector<det::GtBox> gts;
    std::vector<det::Detection> dets;
    const int ng = 1 + static_cast<int>(rng.below(c++, 8)), nd = static_cast<int>(rng.below(c++, 10));
    for (int i = 0; i < ng; ++i)
      gts.push_back({{rng.uniform(c++, 0, 100), rng.uniform(c++, 0, 100), rng.uniform(c++, 2, 40), rng.uniform(c++, 2, 40)}, 0, i});
    for (int i = 0; i < nd; ++i) {
      const auto& g = gts[rng.below(c++, gts.size())].box;
      dets.push_back({{g.x + rng.uniform(c++, -10, 10), g.y + rng.uniform(c++, -10, 10), g.w * rng.uniform(c++, 0.5, 1.5),
                       g.h * rng.uniform(c++, 0.5, 1.5)},
                      1.0, 0});
    }
    // Boundary cases: IoU of exactly 0.3 counts, just below does not.
    if (s % 5 == 0) {
      gts.push_back({{200, 200, 5, 2}, 0, 99});
      dets.push_back({{200, 200, 1.5, 2}, 1.0, 0});
      gts.push_back({{300, 300, 5, 2}, 0, 100});
      dets.push_back({{300, 300, 1.49, 2}, 1.0, 0});
    }
    int hits = 0;
    for (const auto& g : gts) {
      bool hit = false;
      for (const auto& d : dets) hit = hit || ref_iou(d.box, g.box) >= 0.3;
      hits += hit;
    }
    const auto acc = det::accuracy(dets, gts);
    ASSERT_TRUE(acc);
    EXPECT_EQ(*acc, static_cast<double>(hits) / static_cast<double>(gts.size()));
  }
  EXPECT_EQ(iou({200, 200, 5, 2}, {200, 200, 1.5, 2}), 0.3);
  EXPECT_FALSE(det::accuracy({}, std::span<const det::GtBox>{}));
}

TEST(Metric, StratumBoundaries) {
  EXPECT_EQ(det::size_stratum(1023.999), det::Stratum::Small);
  EXPECT_EQ(det::size_stratum(1024.0), det::Stratum::Medium);
  EXPECT_EQ(det::size_stratum(9215.999), det::Stratum::Medium);
  EXPECT_EQ(det::size_stratum(9216.0), det::Stratum::Large);
  EXPECT_EQ(det::size_stratum(Box{0, 0, 32, 32}), det::Stratum::Medium);
  EXPECT_THROW(det::size_stratum(0.0), DataError);
}

TEST(Oracle, VisibilityThresholdAndCanvasMapping) {
  const std::vector<IRect> rects{{100, 100, 48, 48}};
  const auto mask = roi::RegionMask::from_rects(rects);
  const auto plan = mosaic::plan_mosaic(mask);
  const std::vector<det::GtBox> gts{{{110, 110, 20, 20}, 1, 0}, {{130, 130, 40, 40}, 2, 1}, {{400, 400, 10, 10}, 0, 2}};
  const auto dets = det::oracle_detect(plan.placements, mask, gts, {}, 0);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_DOUBLE_EQ(dets[0].box.x, 10);
  EXPECT_DOUBLE_EQ(dets[0].score, 1.0);
  det::OracleConfig loose;
  loose.vis_thresh = 0.1;
  EXPECT_EQ(det::oracle_detect(plan.placements, mask, gts, loose, 0).size(), 2u);
}

TEST(Oracle, FullFrameMaskRecoversEverything) {
  auto c = small_config();
  const auto frames = make_frames(c);
  const auto intr = c.camera.intrinsics();
  const std::vector<IRect> full{intr.frame()};
  const auto mask = roi::RegionMask::from_rects(full);
  det::OracleDetector oracle({});
  for (const auto& fr : frames) {
    const auto dets = detect_on_mask(oracle, fr, mask, mosaic::plan_mosaic(mask), intr, c.seed).frame_dets;
    EXPECT_EQ(det::accuracy(dets, fr.gt), 1.0);
  }
}

TEST(Cost, CropRatioAndAccumulatedAreaReduction) {
  const auto intr = roi::CameraIntrinsics::centered(640, 640, 90);
  FrameTrace one;
  one.ran = true;
  one.mosaic_w = one.mosaic_h = 48;
  one.placements = 1;
  const auto r = cost_model(std::vector<FrameTrace>{one}, intr, {1.0, 0.0});
  EXPECT_NEAR(*r.comm_reduction, 177.8, 0.1);

  roi::RoiSet rois;
  for (int i = 0; i < 26; ++i) rois.push_back({40.0 + 100 * (i % 6), 40.0 + 100 * (i / 6), 48, 1, 0});
  const auto mask = roi::spatial_union(rois, intr.frame());
  const auto plan = mosaic::plan_mosaic(mask);
  EXPECT_EQ(mask.total_area(), 26 * 48 * 48);
  FrameTrace acc;
  acc.ran = true;
  acc.mosaic_w = plan.width;
  acc.mosaic_h = plan.height;
  acc.placements = static_cast<int>(plan.placements.size());
  const auto r2 = cost_model(std::vector<FrameTrace>{acc}, intr, {1.0, 16.0});
  EXPECT_NEAR(100 * r2.area_saved, 85.37, 0.1);
  EXPECT_DOUBLE_EQ(r2.bytes_tx, plan.area() + 16.0 * 26);
}

TEST(Cost, BytesAreAdditiveOverRuns) {
  const auto intr = roi::CameraIntrinsics::centered(100, 100, 90);
  std::vector<FrameTrace> t(5);
  double expect = 0;
  for (int i = 0; i < 5; ++i) {
    t[i].ran = i % 2 == 0;
    t[i].mosaic_w = 10 + i;
    t[i].mosaic_h = 20;
    t[i].placements = i;
    if (t[i].ran) expect += 2.0 * (10 + i) * 20 + 4.0 * i;
  }
  const auto r = cost_model(t, intr, {2.0, 4.0});
  EXPECT_DOUBLE_EQ(r.bytes_tx, expect);
  EXPECT_DOUBLE_EQ(*r.comm_reduction, 5 * 100 * 100 * 2.0 / expect);
  EXPECT_FALSE(cost_model(std::vector<FrameTrace>(3), intr, {}).comm_reduction);
}

TEST(Sweep, AccuracyIsMonotoneInCount) {
  const auto c = small_config();
  const auto tab = sweep(c);
  for (int s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < tab.sides.size(); ++i)
      for (std::size_t n = 1; n < tab.counts.size(); ++n) {
        const auto& a = tab.cells[s][i][n - 1];
        const auto& b = tab.cells[s][i][n];
        EXPECT_EQ(a.gt, b.gt);
        EXPECT_GE(b.hits, a.hits);
      }
  const auto csv = sweep_csv(tab);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "stratum,s,N1,N2,N4,N8,N16,global");
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  auto c = small_config();
  c.sweep.threads = 1;
  const auto a = sweep_csv(sweep(c));
  c.sweep.threads = 4;
  EXPECT_EQ(sweep_csv(sweep(c)), a);
}

TEST(Simulate, DeterministicAndSelfConsistent) {
  const auto c = small_config();
  const auto a = simulate(c), b = simulate(c);
  EXPECT_EQ(report_json(a, c).dump(), report_json(b, c).dump());
  EXPECT_EQ(trace_jsonl(a), trace_jsonl(b));
  EXPECT_EQ(a.refresh_recount, a.policy.refresh_count);
  EXPECT_EQ(a.frames, c.frames);
  for (const auto& f : a.trace) {
    EXPECT_LE(f.s_area, f.u_area);
    if (f.t % c.policy.period == 0) {
      EXPECT_TRUE(f.refreshed);
    }
  }
}

TEST(Simulate, RotationOnlyTraceHasNoInflation) {
  auto c = small_config();
  c.stabilization.enabled = true;
  c.stabilization.imu = ImuSource::Synthetic;
  c.stabilization.synthetic.accel_amp = 0;
  const auto r = simulate(c);
  for (const auto& f : r.trace) EXPECT_EQ(f.alpha, 0.0);
  c.stabilization.synthetic.accel_amp = 30;
  const auto moving = simulate(c);
  EXPECT_TRUE(std::any_of(moving.trace.begin(), moving.trace.end(), [](const FrameTrace& f) { return f.alpha > 0; }));
  for (const auto& f : moving.trace) EXPECT_LE(f.alpha, c.stabilization.alpha_max);
}

TEST(Config, ParsesAndRejectsUnknownFields) {
  const auto j = nlohmann::json::parse(R"({"seed": 9, "policy": {"K": null, "B": "inf", "R": 5}, "roi": {"count": 4}})");
  const auto c = sim_config_from_json(j);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.policy.window, attention::kUnboundedWindow);
  EXPECT_EQ(c.policy.period, 5);
  EXPECT_EQ(c.roi.count, 4);
  try {
    sim_config_from_json(nlohmann::json::parse(R"({"policy": {"lamda": 0.5}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("policy.lamda"), std::string::npos);
  }
  EXPECT_THROW(sim_config_from_json(nlohmann::json::parse(R"({"policy": {"R": 0}})")), ConfigError);
  EXPECT_THROW(sim_config_from_json(nlohmann::json::parse(R"({"roi": {"count": "x"}})")), ConfigError);
  const auto echo = sim_config_to_json(c);
  EXPECT_EQ(sim_config_to_json(sim_config_from_json(nlohmann::json::parse(echo.dump()))).dump(), echo.dump());
}

TEST(Gaze, AwayFramesAreSkipped) {
  auto c = small_config();
  const auto dir = temp_dir("gaze");
  {
    std::ofstream f(dir / "gaze.csv");
    f << "t,gx,gy,gz\n";
    for (int t = 0; t < c.frames; ++t) f << t << "," << 0.0 << "," << 0.0 << "," << (t == 4 ? -1.0 : 1.0) << "\n";
  }
  c.gaze.kind = GazeKind::Recorded;
  c.gaze.path = dir / "gaze.csv";
  const auto r = simulate(c);
  EXPECT_EQ(r.gaze_away, 1);
  EXPECT_TRUE(r.trace[4].gaze_away);
  EXPECT_EQ(r.trace[4].s_area, 0);
}

TEST(External, FileProtocolFailuresAndTimeout) {
  const auto dir = temp_dir("external");
  const auto script = dir / "det.sh";
  {
    std::ofstream f(script);
    f << "#!/bin/sh\n"
         "test -s \"$1\" || exit 3\n"
         "grep -q placements \"$2\" || exit 4\n"
         "echo '[{\"box\":[1,2,3,4],\"score\":0.9,\"class\":1}]' > \"$3\"\n";
  }
  det::ExternalConfig ec{"sh " + script.string(), dir / "work", 5.0};
  det::ExternalDetector d(ec);
  GrayImage canvas(8, 8, 100);
  const std::vector<mosaic::Placement> ps{{{0, 0, 8, 8}, {0, 0, 8, 8}}};
  det::DetectRequest req;
  req.canvas = &canvas;
  req.canvas_width = req.canvas_height = 8;
  req.placements = &ps;
  const auto dets = d.detect(req);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_DOUBLE_EQ(dets[0].box.h, 4);

  det::ExternalDetector failing({"exit 7; true", dir / "work", 5.0});
  EXPECT_THROW(failing.detect(req), DataError);
  det::ExternalDetector garbage({"echo nope > \"$2\"; true", dir / "work", 5.0});
  EXPECT_THROW(garbage.detect(req), DataError);
  det::ExternalDetector slow({"sleep 5; true", dir / "work", 0.2});
  EXPECT_THROW(slow.detect(req), DataError);

  // A failing detector is counted per frame and the run completes.
  auto c = small_config();
  c.frames = 6;
  c.detector.kind = DetectorKind::External;
  c.detector.external = {"exit 1; true", dir / "work", 5.0};
  const auto r = simulate(c);
  EXPECT_EQ(r.frames, 6);
  EXPECT_GT(r.failures, 0);
}

TEST(Detections, JsonValidation) {
  const std::vector<det::Detection> d{{{1, 2, 3, 4}, 0.5, 2}};
  const auto back = det::detections_from_json(det::detections_to_json(d), "t");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].cls, 2);
  EXPECT_THROW(det::detections_from_json(nlohmann::json::parse(R"([{"box":[1,2,3]}])"), "t"), DataError);
  EXPECT_THROW(det::detections_from_json(nlohmann::json::parse(R"({"box":[1,2,3,4]})"), "t"), DataError);
}
