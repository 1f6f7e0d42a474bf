#include <set>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace glance;
using namespace glance::mosaic;
using roi::RegionMask;

namespace {

RegionMask random_mask(std::uint64_t s, int n, int extent = 300, int side = 60) {
  const CounterRng rng(s, 21);
  std::vector<IRect> rects;
  for (int i = 0; i < n; ++i) {
    const auto b = static_cast<std::uint64_t>(3 * i);
    const int w = 8 + static_cast<int>(rng.below(b + 2, side));
    rects.push_back({static_cast<int>(rng.below(b, extent - w)), static_cast<int>(rng.below(b + 1, extent - w)), w, w});
  }
  return RegionMask::from_rects(rects);
}

}  // namespace

TEST(Components, CoverMaskAndAreDisjoint) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto m = random_mask(s, 1 + static_cast<int>(s % 9));
    const auto comps = component_rects(m);
    for (const auto& r : m.rects()) {
      std::int64_t covered = 0;
      for (const auto& c : comps) covered += intersect(c, r).area();
      EXPECT_EQ(covered, r.area());
    }
    for (std::size_t i = 0; i < comps.size(); ++i)
      for (std::size_t j = i + 1; j < comps.size(); ++j) EXPECT_TRUE(intersect(comps[i], comps[j]).empty());
  }
}

TEST(Components, TouchingSquaresMerge) {
  const std::vector<IRect> r{{0, 0, 10, 10}, {10, 0, 10, 10}, {50, 50, 5, 5}};
  const auto comps = component_rects(RegionMask::from_rects(r));
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0], (IRect{0, 0, 20, 10}));
  // Diagonal contact is not 4-connected.
  const std::vector<IRect> d{{0, 0, 10, 10}, {10, 10, 10, 10}};
  EXPECT_EQ(component_rects(RegionMask::from_rects(d)).size(), 2u);
}

TEST(Packing, PlacementsAreDisjointAndInsideCanvas) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto m = random_mask(s, 1 + static_cast<int>(s % 12));
    const auto plan = plan_mosaic(m);
    const IRect canvas{0, 0, plan.width, plan.height};
    for (std::size_t i = 0; i < plan.placements.size(); ++i) {
      const auto& p = plan.placements[i];
      EXPECT_EQ(p.src.w, p.dst.w);
      EXPECT_EQ(p.src.h, p.dst.h);
      EXPECT_EQ(intersect(p.dst, canvas), p.dst);
      for (std::size_t j = i + 1; j < plan.placements.size(); ++j)
        EXPECT_TRUE(intersect(p.dst, plan.placements[j].dst).empty());
    }
    EXPECT_GE(plan.area(), m.total_area());
    EXPECT_GE(plan.area(), plan.placed_area());
  }
}

TEST(Packing, SingleRoiCanvasIsTheRoi) {
  const std::vector<IRect> r{{100, 120, 48, 48}};
  const auto plan = plan_mosaic(RegionMask::from_rects(r));
  EXPECT_EQ(plan.width, 48);
  EXPECT_EQ(plan.height, 48);
  EXPECT_TRUE(plan_mosaic(RegionMask{}).empty());
}

TEST(Build, CanvasPixelsComeFromTheFrame) {
  GrayImage frame(200, 150);
  for (int y = 0; y < 150; ++y)
    for (int x = 0; x < 200; ++x) frame.at(x, y) = static_cast<std::uint8_t>((x * 7 + y * 13) & 0xff);
  const std::vector<IRect> r{{5, 5, 30, 30}, {100, 40, 48, 48}, {120, 70, 20, 20}};
  const auto mosaic = build_mosaic(frame, RegionMask::from_rects(r));
  for (int y = 0; y < mosaic.canvas.height; ++y)
    for (int x = 0; x < mosaic.canvas.width; ++x)
      if (const auto src = canvas_to_frame(x, y, mosaic.placements)) {
        EXPECT_EQ(mosaic.canvas.at(x, y), frame.at(src->first, src->second));
      }
  EXPECT_THROW(build_mosaic(frame, RegionMask{}), DataError);
  const std::vector<IRect> outside{{190, 140, 20, 20}};
  EXPECT_THROW(build_mosaic(frame, RegionMask::from_rects(outside)), DataError);
}

TEST(Backprojection, PointMapsInvert) {
  const auto plan = plan_mosaic(random_mask(3, 8));
  for (const auto& p : plan.placements) {
    const auto c = frame_to_canvas(p.src.x + 1, p.src.y + 2, plan.placements);
    ASSERT_TRUE(c);
    const auto f = canvas_to_frame(c->first, c->second, plan.placements);
    ASSERT_TRUE(f);
    EXPECT_EQ(*f, (std::pair{p.src.x + 1, p.src.y + 2}));
  }
}

TEST(Backprojection, BoxInsideOnePlacementTranslates) {
  const std::vector<IRect> r{{100, 100, 50, 50}, {300, 10, 40, 40}};
  const auto plan = plan_mosaic(RegionMask::from_rects(r));
  for (const auto& p : plan.placements) {
    const Box b{p.dst.x + 3.5, p.dst.y + 4.0, 10, 12};
    const auto bp = backproject(b, plan.placements);
    ASSERT_EQ(bp.boxes.size(), 1u);
    EXPECT_DOUBLE_EQ(bp.boxes[0].x, p.src.x + 3.5);
    EXPECT_DOUBLE_EQ(bp.boxes[0].y, p.src.y + 4.0);
    EXPECT_FALSE(bp.orphan);
  }
}

TEST(Backprojection, SpanningBoxSplitsAndOrphansAreFlagged) {
  const std::vector<Placement> ps{{{0, 0, 10, 10}, {0, 0, 10, 10}}, {{100, 0, 10, 10}, {10, 0, 10, 10}}};
  const auto bp = backproject({5, 2, 10, 4}, ps);
  ASSERT_EQ(bp.boxes.size(), 2u);
  EXPECT_DOUBLE_EQ(bp.boxes[1].x, 100);
  EXPECT_DOUBLE_EQ(bp.boxes[1].w, 5);
  EXPECT_TRUE(backproject({50, 50, 3, 3}, ps).orphan);
  // Pieces adjacent in the frame re-merge.
  const std::vector<Placement> adj{{{0, 0, 10, 10}, {20, 0, 10, 10}}, {{10, 0, 10, 10}, {0, 0, 10, 10}}};
  const auto m = backproject({5, 0, 20, 5}, adj);
  EXPECT_EQ(m.boxes.size(), 2u);
  const auto joined = backproject({0, 0, 30, 5}, adj);
  ASSERT_EQ(joined.boxes.size(), 1u);
  EXPECT_DOUBLE_EQ(joined.boxes[0].w, 20);
}

TEST(Placements, JsonRoundTrip) {
  const auto plan = plan_mosaic(random_mask(9, 6));
  EXPECT_EQ(placements_from_json(placements_to_json(plan.placements)), plan.placements);
  EXPECT_THROW(placements_from_json(nlohmann::json::parse(R"([{"src":[1,2,3],"dst":[0,0,1,1]}])")), DataError);
}
