#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace glance;
using namespace glance::stab;

namespace {
const auto kIntr = roi::CameraIntrinsics::centered(640, 640, 90);
}

TEST(Shift, KnownValue) {
  const auto s = rotation_shift(deg2rad(8.3), 0, 320.0);
  EXPECT_NEAR(s.du, -46.7, 0.05);
  EXPECT_NEAR(s.du, -320 * std::tan(deg2rad(8.3)), 1e-9);
  EXPECT_EQ(s.dv, 0);
}

TEST(Shift, SmallAngleBranch) {
  const double d = deg2rad(1.0);
  EXPECT_DOUBLE_EQ(rotation_shift(d, 0, 320.0).du, -320 * d);
  EXPECT_DOUBLE_EQ(rotation_shift(d, 0, 320.0, ShiftMode::Exact).du, -320 * std::tan(d));
  EXPECT_LT(std::abs(rotation_shift(d, 0, 320.0).du - rotation_shift(d, 0, 320.0, ShiftMode::Exact).du), 0.01);
}

TEST(Shift, BeyondHalfFovIsOutOfFrame) {
  EXPECT_TRUE(rotation_shift(deg2rad(46), 0, kIntr).out_of_frame);
  EXPECT_FALSE(rotation_shift(deg2rad(44), 0, kIntr).out_of_frame);
}

TEST(World, RoundTripBelowHalfPixel) {
  const CounterRng rng(1, 41);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const PoseSample pose{rng.uniform(4 * i, -3, 3), rng.uniform(4 * i + 1, -0.6, 0.6), 0, 0};
    const double u = rng.uniform(4 * i + 2, 0, 640), v = rng.uniform(4 * i + 3, 0, 640);
    const auto back = from_world(to_world(u, v, pose, kIntr), pose, kIntr);
    ASSERT_TRUE(back);
    EXPECT_LT(std::hypot(back->first - u, back->second - v), 0.5);
  }
}

TEST(World, RotationMatchesFrameShift) {
  // A point seen before a yaw turn reappears shifted by -f tan(dyaw) when it
  // was on the optical axis.
  const PoseSample a{0, 0, 0, 0}, b{deg2rad(5), 0, 0, 0};
  const auto p = from_world(to_world(320, 320, a, kIntr), b, kIntr);
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->first - 320, rotation_shift(deg2rad(5), 0, kIntr, ShiftMode::Exact).du, 1e-9);
}

TEST(World, MapStoresAndExpires) {
  WorldMap map(1.0);
  const PoseSample pose{0.1, 0, 0, 0};
  map.insert({320, 320, 48, 1, 0}, pose, kIntr, 0.5);
  EXPECT_GT(map.size(), 0u);
  EXPECT_FALSE(map.visible_rects(pose, kIntr, 0.1).empty());
  map.expire(0.6);
  EXPECT_EQ(map.size(), 0u);
}

TEST(Reproject, RoiFollowsRotation) {
  const PoseSample a{0, 0, 0, 0}, b{deg2rad(3), deg2rad(-2), 0, 0};
  const auto r = reproject_roi({320, 320, 48, 1, 0}, a, b, kIntr);
  EXPECT_TRUE(r.visible);
  EXPECT_NEAR(r.roi.u, 320 - 320 * std::tan(deg2rad(3)), 1e-9);
  EXPECT_NEAR(r.roi.v, 320 + 320 * std::tan(deg2rad(2)), 1e-9);
  EXPECT_EQ(r.roi.side, 48);
  EXPECT_FALSE(reproject_roi({320, 320, 48, 1, 0}, a, {deg2rad(60), 0, 0, 0}, kIntr).visible);
}

TEST(Cache, TimeoutShrinksWithRotationRate) {
  const TimeoutLaw law{0.5, 2.0};
  EXPECT_DOUBLE_EQ(law(0), 0.5);
  EXPECT_DOUBLE_EQ(law(1), 0.5 / 3);
  EXPECT_GT(law(0.1), law(0.2));
  BoxCache cache;
  const std::vector<Box> boxes{{100, 100, 20, 20}};
  cache.insert(boxes, {0, 0, 0, 0}, 0.3);
  const auto pred = cache.predict({deg2rad(4), 0, 0, 0.1}, kIntr);
  ASSERT_EQ(pred.size(), 1u);
  EXPECT_NEAR(pred[0].x, 100 - 320 * std::tan(deg2rad(4)), 1e-9);
  EXPECT_TRUE(cache.predict({0, 0, 0, 0.3}, kIntr).empty());
}

TEST(Inflation, BoundsOnRandomInputs) {
  const CounterRng rng(2, 42);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const double a = rng.uniform(4 * i, -20, 20), dt = rng.uniform(4 * i + 1, 0.001, 0.2);
    const double z = rng.uniform(4 * i + 2, 0.1, 5), amax = rng.uniform(4 * i + 3, 0, 0.5);
    const double alpha = inflation_alpha(a, dt, z, amax);
    EXPECT_GE(alpha, 0);
    EXPECT_LE(alpha, std::abs(a) * dt / z + 1e-15);
    EXPECT_LE(alpha, amax);
    if (a <= 0) {
      EXPECT_EQ(alpha, 0);
    }
  }
  EXPECT_THROW(inflation_alpha(1, 0.1, 0, 0.2), ConfigError);
}

TEST(Inflation, BudgetIsRespected) {
  const IRect frame{0, 0, 640, 640};
  const roi::RoiSet rois{{100, 100, 48, 1, 0}, {400, 400, 48, 1, 0}};
  const auto full = inflate_rois(rois, 0.5, frame, 1e12);
  EXPECT_DOUBLE_EQ(full.alpha, 0.5);
  EXPECT_DOUBLE_EQ(full.rois[0].side, 72);
  const auto capped = inflate_rois(rois, 0.5, frame, 2 * 60 * 60);
  EXPECT_LT(capped.alpha, 0.5);
  EXPECT_LE(roi::spatial_union(capped.rois, frame).total_area(), 2 * 60 * 60);
  EXPECT_DOUBLE_EQ(inflate_roi({10, 10, 600, 1, 0}, 0.5, frame).side, 640);
}

TEST(Imu, CsvRoundTripAndErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "glance_test_stab";
  std::filesystem::create_directories(dir);
  SyntheticImuConfig c;
  c.frames = 20;
  c.dt = 1.0 / 30;
  const auto trace = synthetic_imu(c);
  write_imu_csv(dir / "imu.csv", trace);
  const auto back = read_imu_csv(dir / "imu.csv");
  ASSERT_EQ(back.size(), trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) EXPECT_NEAR(back[i].yaw, trace[i].yaw, 1e-12);
  std::ofstream(dir / "bad.csv") << "t,yaw,pitch,a_fwd\n0,0,0,0\n0.1,zzz,0,0\n";
  try {
    read_imu_csv(dir / "bad.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
  }
}
