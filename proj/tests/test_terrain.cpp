#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <set>

#include "stairclimb/rng.hpp"
#include "stairclimb/terrain.hpp"
#include "stairclimb/terrain_io.hpp"
#include "support.hpp"

namespace sc = stairclimb;
using sc::DifficultyMode;
using sc::StairKind;

namespace {

constexpr StairKind kAllKinds[] = {StairKind::Pyramid, StairKind::Straight, StairKind::LShaped,
                                   StairKind::UShaped, StairKind::Spiral};

sc::HeightField train_field(StairKind kind, int level) {
  return sc::generate(sc::difficulty_to_spec(kind, level, DifficultyMode::Train), 1);
}

// Heights met walking the centerline in 1 cm steps, consecutive repeats merged.
std::vector<double> centerline_plateaus(const sc::HeightField& hf) {
  std::vector<double> out;
  const double len = hf.centerline.length();
  for (double s = 0.0; s <= len; s += 0.01) {
    const auto p = hf.centerline.point_at(s);
    const double h = sc::sample_height(hf, p.x, p.y);
    if (out.empty() || std::abs(h - out.back()) > 1e-12) out.push_back(h);
  }
  return out;
}

}  // namespace

TEST(DifficultyRamp, TrainEndpointsAndMidLevel) {
  const auto l1 = sc::difficulty_to_spec(StairKind::Straight, 1, DifficultyMode::Train);
  EXPECT_DOUBLE_EQ(l1.riser_height, 0.08);
  EXPECT_DOUBLE_EQ(l1.tread_depth, 0.32);
  const auto l10 = sc::difficulty_to_spec(StairKind::Straight, 10, DifficultyMode::Train);
  EXPECT_NEAR(l10.riser_height, 0.20, 1e-12);
  EXPECT_NEAR(l10.tread_depth, 0.26, 1e-12);
  const auto l5 = sc::difficulty_to_spec(StairKind::Straight, 5, DifficultyMode::Train);
  EXPECT_NEAR(l5.riser_height, 0.08 + 4.0 * (0.12 / 9.0), 1e-12);
  EXPECT_NEAR(l5.riser_height, 0.133333333333, 1e-9);
  EXPECT_NEAR(l5.tread_depth, 0.32 - 4.0 * (0.06 / 9.0), 1e-12);
}

TEST(DifficultyRamp, MonotoneInBothModes) {
  for (auto mode : {DifficultyMode::Train, DifficultyMode::Test}) {
    for (int l = 2; l <= sc::level_count(mode); ++l) {
      const auto a = sc::difficulty_to_spec(StairKind::UShaped, l - 1, mode);
      const auto b = sc::difficulty_to_spec(StairKind::UShaped, l, mode);
      EXPECT_GT(b.riser_height, a.riser_height);
      EXPECT_LT(b.tread_depth, a.tread_depth);
    }
  }
}

TEST(DifficultyRamp, TestLevelsNeverCoincideWithTrainLevels) {
  for (int t = 1; t <= 6; ++t) {
    const auto ts = sc::difficulty_to_spec(StairKind::Straight, t, DifficultyMode::Test);
    for (int l = 1; l <= 10; ++l) {
      const auto tr = sc::difficulty_to_spec(StairKind::Straight, l, DifficultyMode::Train);
      EXPECT_GT(std::abs(ts.riser_height - tr.riser_height), 1e-6) << "test " << t << " train " << l;
    }
  }
}

TEST(DifficultyRamp, RejectsOutOfRangeLevels) {
  EXPECT_THROW(sc::difficulty_to_spec(StairKind::Straight, 0, DifficultyMode::Train), std::out_of_range);
  EXPECT_THROW(sc::difficulty_to_spec(StairKind::Straight, 11, DifficultyMode::Train), std::out_of_range);
  EXPECT_THROW(sc::difficulty_to_spec(StairKind::Straight, 7, DifficultyMode::Test), std::out_of_range);
}

TEST(StairSpec, RejectsInvalidGeometry) {
  auto s = sc::default_spec(StairKind::Straight);
  s.riser_height = -0.1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = sc::default_spec(StairKind::UShaped);
  s.runs = 1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = sc::default_spec(StairKind::Spiral);
  s.spiral_total_turn = 2.0 * std::numbers::pi;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Generate, StraightGoalHeightIsRiserTimesSteps) {
  auto s = sc::default_spec(StairKind::Straight);
  s.riser_height = 0.08;
  s.steps_per_run = 10;
  const auto hf = sc::generate(s, 3);
  EXPECT_NEAR(hf.goal.z, 0.80, 1e-12);
}

TEST(Generate, UShapedGoalHeightByIndependentGridScan) {
  const auto hf = train_field(StairKind::UShaped, 1);
  ASSERT_EQ(hf.spec.steps_per_run, 9);
  // Highest walkable cell anywhere on the grid.
  double top = -1e9;
  for (int iy = 0; iy < hf.ny; ++iy) {
    for (int ix = 0; ix < hf.nx; ++ix) {
      if (!hf.is_wall(ix, iy)) top = std::max(top, hf.at(ix, iy));
    }
  }
  EXPECT_NEAR(top, 18 * 0.08, 1e-12);
  EXPECT_NEAR(hf.goal.z, 1.44, 1e-12);
  // Every cell centre inside the goal disc sits on that top landing.
  int inside = 0;
  for (int iy = 0; iy < hf.ny; ++iy) {
    for (int ix = 0; ix < hf.nx; ++ix) {
      const double cx = (ix + 0.5) * hf.cell_size, cy = (iy + 0.5) * hf.cell_size;
      if (std::hypot(cx - hf.goal.x, cy - hf.goal.y) > 0.5) continue;
      ++inside;
      EXPECT_FALSE(hf.is_wall(ix, iy));
      EXPECT_NEAR(hf.at(ix, iy), 1.44, 1e-12);
    }
  }
  EXPECT_GT(inside, 100);
}

TEST(Generate, ThirdTreadOfStraightRunAtThreeRisers) {
  auto s = sc::default_spec(StairKind::Straight);
  s.riser_height = 0.1;
  const sc::GeneratorLimits g;
  const auto hf = sc::generate(s, 0, g);
  const double first_riser_x = hf.spawn.x + g.spawn_setback;
  EXPECT_NEAR(sc::sample_height(hf, first_riser_x + 2.5 * s.tread_depth, hf.spawn.y), 0.30, 1e-12);
  EXPECT_NEAR(sc::sample_height(hf, first_riser_x - 0.25, hf.spawn.y), 0.0, 1e-12);
  EXPECT_NEAR(sc::sample_height(hf, first_riser_x + 0.5 * s.tread_depth, hf.spawn.y), 0.1, 1e-12);
}

TEST(Generate, OutsideGridIsVoid) {
  const auto hf = train_field(StairKind::Straight, 1);
  EXPECT_EQ(sc::sample_height(hf, -1.0, hf.spawn.y), sc::kVoidHeight);
  EXPECT_EQ(sc::sample_height(hf, hf.extent_x() + 1.0, hf.spawn.y), -10.0);
  EXPECT_EQ(sc::sample_height(hf, hf.spawn.x, -1.0), -10.0);
}

TEST(Generate, SpawnAndGoalAreWalkableAndOnGrid) {
  for (auto kind : kAllKinds) {
    for (int level : {1, 10}) {
      const auto hf = train_field(kind, level);
      EXPECT_TRUE(hf.contains(hf.spawn.x, hf.spawn.y)) << sc::to_string(kind);
      EXPECT_TRUE(hf.contains(hf.goal.x, hf.goal.y)) << sc::to_string(kind);
      EXPECT_FALSE(sc::is_wall_at(hf, hf.spawn.x, hf.spawn.y)) << sc::to_string(kind);
      EXPECT_FALSE(sc::is_wall_at(hf, hf.goal.x, hf.goal.y)) << sc::to_string(kind);
      EXPECT_NEAR(sc::sample_height(hf, hf.spawn.x, hf.spawn.y), 0.0, 1e-12);
      EXPECT_NEAR(hf.goal.z, hf.spec.riser_height * hf.spec.steps_per_run * hf.spec.runs, 1e-9)
          << sc::to_string(kind);
    }
  }
}

TEST(Generate, CenterlineHeightsNeverDecrease) {
  for (auto kind : kAllKinds) {
    for (auto mode : {DifficultyMode::Train, DifficultyMode::Test}) {
      for (int level = 1; level <= sc::level_count(mode); ++level) {
        const auto hf = sc::generate(sc::difficulty_to_spec(kind, level, mode), 2);
        const double len = hf.centerline.length();
        double prev = -1e9;
        for (double s = 0.0; s <= len; s += 0.01) {
          const auto p = hf.centerline.point_at(s);
          const double h = sc::sample_height(hf, p.x, p.y);
          ASSERT_FALSE(sc::is_wall_at(hf, p.x, p.y)) << sc::to_string(kind) << " s=" << s;
          ASSERT_GE(h, prev - 1e-12) << sc::to_string(kind) << " level " << level << " s=" << s;
          prev = h;
        }
      }
    }
  }
}

TEST(Generate, PlateauCountIsStepsPlusOnePerRun) {
  for (auto kind : {StairKind::Straight, StairKind::Pyramid, StairKind::Spiral}) {
    const auto hf = train_field(kind, 4);
    EXPECT_EQ(static_cast<int>(centerline_plateaus(hf).size()), hf.spec.steps_per_run + 1)
        << sc::to_string(kind);
  }
  // Two runs share the middle landing: (n + 1) + (n + 1) - 1 distinct plateaus.
  for (auto kind : {StairKind::LShaped, StairKind::UShaped}) {
    const auto hf = train_field(kind, 4);
    EXPECT_EQ(static_cast<int>(centerline_plateaus(hf).size()), 2 * hf.spec.steps_per_run + 1)
        << sc::to_string(kind);
  }
}

TEST(Generate, PlateauCountOnEachUShapedRun) {
  const auto hf = train_field(StairKind::UShaped, 3);
  const int n = hf.spec.steps_per_run;
  const double r = hf.spec.riser_height;
  // First run lives in the lower lane, second in the upper lane.
  std::set<long> lane_a, lane_b;
  const auto& pts = hf.centerline.points();
  for (double x = 0.0; x < hf.extent_x(); x += 0.01) {
    const double ha = sc::sample_height(hf, x, pts[0].y);
    const double hb = sc::sample_height(hf, x, pts.back().y);
    if (!sc::is_wall_at(hf, x, pts[0].y) && ha >= 0.0) lane_a.insert(std::lround(ha / r));
    if (!sc::is_wall_at(hf, x, pts.back().y) && hb >= 0.0) lane_b.insert(std::lround(hb / r));
  }
  // Lane A: ground, treads 1..n-1 and the landing at n.
  EXPECT_EQ(static_cast<int>(lane_a.size()), n + 1);
  EXPECT_EQ(*lane_a.rbegin(), n);
  // Lane B: landing n, treads n+1..2n-1, top 2n, plus the surrounding ground.
  lane_b.erase(0);
  EXPECT_EQ(static_cast<int>(lane_b.size()), n + 1);
  EXPECT_EQ(*lane_b.begin(), n);
  EXPECT_EQ(*lane_b.rbegin(), 2 * n);
}

TEST(Generate, UShapedRunsAreAntiparallel) {
  const auto hf = train_field(StairKind::UShaped, 5);
  ASSERT_EQ(hf.run_directions.size(), 2u);
  EXPECT_NEAR(sc::dot(hf.run_directions[0], hf.run_directions[1]), -1.0, 1e-12);
  // Measured from the grid: height gradient mid-run in each lane.
  const auto& pts = hf.centerline.points();
  // Just past a riser edge, where both lanes have one.
  const double xa = hf.spawn.x + 0.5 + 4.0 * hf.spec.tread_depth + 0.01;
  const auto da = sc::ascent_direction(hf, xa, pts[0].y);
  const auto db = sc::ascent_direction(hf, xa, pts.back().y);
  EXPECT_NEAR(sc::dot(da, db), -1.0, 1e-9);
  EXPECT_NEAR(da.x, 1.0, 1e-9);
}

TEST(Generate, LShapedRunsArePerpendicular) {
  const auto hf = train_field(StairKind::LShaped, 5);
  ASSERT_EQ(hf.run_directions.size(), 2u);
  EXPECT_NEAR(sc::dot(hf.run_directions[0], hf.run_directions[1]), 0.0, 1e-12);
}

TEST(Generate, RegenerationIsBitIdentical) {
  for (auto kind : kAllKinds) {
    const auto a = train_field(kind, 7);
    const auto b = train_field(kind, 7);
    ASSERT_EQ(a.nx, b.nx);
    ASSERT_EQ(a.ny, b.ny);
    EXPECT_EQ(std::memcmp(a.heights.data(), b.heights.data(), a.heights.size() * sizeof(double)), 0);
    EXPECT_EQ(a.wall, b.wall);
    EXPECT_EQ(a.goal.x, b.goal.x);
    EXPECT_EQ(a.goal.z, b.goal.z);
  }
}

TEST(Generate, ExportIsByteStable) {
  sc::testing::TempDir dir("export");
  const auto hf = train_field(StairKind::LShaped, 2);
  const auto p1 = sc::export_heightfield(hf, dir / "a", "field");
  const auto p2 = sc::export_heightfield(train_field(StairKind::LShaped, 2), dir / "b", "field");
  EXPECT_EQ(sc::testing::slurp(p1.csv), sc::testing::slurp(p2.csv));
  EXPECT_EQ(sc::testing::slurp(p1.pgm), sc::testing::slurp(p2.pgm));
  EXPECT_EQ(sc::testing::slurp(p1.manifest), sc::testing::slurp(p2.manifest));
  const auto pgm = sc::testing::slurp(p1.pgm);
  EXPECT_EQ(pgm.substr(0, 2), "P5");
}

TEST(Generate, FootprintCapIsEnforced) {
  sc::GeneratorLimits g;
  g.max_cells_per_axis = 50;
  EXPECT_THROW(sc::generate(sc::default_spec(StairKind::Straight), 0, g), std::length_error);
}

TEST(LocalHeightmap, FlatGroundReadsMinusBaseHeight) {
  const auto hf = sc::testing::flat_field();
  const auto hm = sc::local_heightmap(hf, 3.0, 3.0, 0.35, 0.7);
  for (double v : hm) EXPECT_DOUBLE_EQ(v, -0.35);
}

TEST(LocalHeightmap, HalfTurnRotatesGridBy180Degrees) {
  const auto hf = train_field(StairKind::LShaped, 6);
  const double x = hf.spawn.x + 1.013, y = hf.spawn.y + 0.027;
  const auto h0 = sc::local_heightmap(hf, x, y, 0.35, 0.0);
  const auto hpi = sc::local_heightmap(hf, x, y, 0.35, std::numbers::pi);
  constexpr int n = sc::kHeightmapSide;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      EXPECT_DOUBLE_EQ(hpi[r * n + c], h0[(n - 1 - r) * n + (n - 1 - c)]) << r << "," << c;
    }
  }
}

TEST(LocalHeightmap, RiserAheadRaisesForwardRows) {
  // Riser of 0.1 m with its edge at x = 3.0; query 0.487 m behind it.
  const auto hf = sc::testing::make_field(120, 120, 0.05,
                                          [](double x, double) { return x >= 3.0 ? 0.1 : 0.0; });
  const auto hm = sc::local_heightmap(hf, 2.513, 3.0, 0.35, 0.0);
  constexpr int n = sc::kHeightmapSide;
  for (int r = 0; r < n; ++r) {
    const double expect = r >= 15 ? 0.1 - 0.35 : -0.35;
    for (int c = 0; c < n; ++c) EXPECT_NEAR(hm[r * n + c], expect, 1e-12) << r << "," << c;
  }
}

TEST(LocalHeightmap, TranslationEquivariance) {
  const auto hf = train_field(StairKind::UShaped, 4);
  // Same terrain padded by whole cells on the low sides.
  const int kx = 7, ky = 4;
  sc::HeightField moved = hf;
  moved.nx = hf.nx + kx;
  moved.ny = hf.ny + ky;
  moved.heights.assign(static_cast<std::size_t>(moved.nx) * moved.ny, sc::kVoidHeight);
  moved.wall.assign(moved.heights.size(), 0);
  for (int iy = 0; iy < hf.ny; ++iy) {
    for (int ix = 0; ix < hf.nx; ++ix) {
      moved.heights[static_cast<std::size_t>(iy + ky) * moved.nx + ix + kx] = hf.at(ix, iy);
    }
  }
  const double dx = kx * hf.cell_size, dy = ky * hf.cell_size;
  for (double yaw : {0.0, 0.4, -2.0}) {
    const double x = hf.spawn.x + 0.61, y = hf.spawn.y + 0.013;
    const auto a = sc::local_heightmap(hf, x, y, 0.35, yaw);
    const auto b = sc::local_heightmap(moved, x + dx, y + dy, 0.35, yaw);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12) << i;
  }
}

TEST(CenterlineProgress, KnownOffsets) {
  const sc::Centerline line({{0.0, 0.0}, {4.0, 0.0}, {4.0, 3.0}});
  auto p = sc::centerline_progress(line, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(p.arclength, 0.0);
  p = sc::centerline_progress(line, 2.0, 0.3);
  EXPECT_NEAR(p.arclength, 2.0, 1e-12);
  EXPECT_NEAR(p.lateral_offset, 0.3, 1e-12);
  p = sc::centerline_progress(line, 2.0, -0.3);
  EXPECT_NEAR(p.lateral_offset, -0.3, 1e-12);
  p = sc::centerline_progress(line, 4.0, 3.0);
  EXPECT_NEAR(p.arclength, 7.0, 1e-12);
  EXPECT_NEAR(std::abs(sc::centerline_progress(line, 4.3, 1.0).lateral_offset), 0.3, 1e-12);
}

TEST(CenterlineProgress, MatchesDensePolylineBruteForce) {
  for (auto kind : {StairKind::UShaped, StairKind::LShaped, StairKind::Spiral}) {
    const auto hf = train_field(kind, 3);
    const double len = hf.centerline.length();
    sc::Rng rng(17);
    for (int k = 0; k < 50; ++k) {
      const double s_true = sc::uniform(rng, 0.0, len);
      const auto base = hf.centerline.point_at(s_true);
      const double x = base.x + sc::uniform(rng, -0.3, 0.3);
      const double y = base.y + sc::uniform(rng, -0.3, 0.3);
      double best = 1e9;
      for (double s = 0.0; s <= len; s += 1e-3) {
        const auto q = hf.centerline.point_at(s);
        best = std::min(best, std::hypot(x - q.x, y - q.y));
      }
      const auto proj = sc::centerline_progress(hf, x, y);
      EXPECT_NEAR(std::abs(proj.lateral_offset), best, 2e-3) << sc::to_string(kind);
      const auto at = hf.centerline.point_at(proj.arclength);
      EXPECT_NEAR(std::hypot(x - at.x, y - at.y), best, 2e-3) << sc::to_string(kind);
    }
  }
}

TEST(CenterlineProgress, ArclengthGrowsTowardGoal) {
  const auto hf = train_field(StairKind::Straight, 1);
  const auto a = sc::centerline_progress(hf, hf.spawn.x, hf.spawn.y);
  const auto b = sc::centerline_progress(hf, hf.goal.x, hf.goal.y);
  EXPECT_NEAR(a.arclength, 0.0, 1e-12);
  EXPECT_NEAR(b.arclength, hf.centerline.length(), 1e-12);
}

TEST(AscentDirection, FlatGroundHasNone) {
  const auto hf = sc::testing::flat_field();
  const auto d = sc::ascent_direction(hf, 2.0, 2.0);
  EXPECT_EQ(d.x, 0.0);
  EXPECT_EQ(d.y, 0.0);
}

TEST(StairKindNames, RoundTrip) {
  for (auto kind : kAllKinds) EXPECT_EQ(sc::parse_stair_kind(sc::to_string(kind)), kind);
  EXPECT_THROW(sc::parse_stair_kind("escalator"), std::invalid_argument);
}
