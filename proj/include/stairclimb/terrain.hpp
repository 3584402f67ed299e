#pragma once

// Procedural stair heightfields and the spatial queries the environment needs.
//
// All geometry is laid out in a local frame, then shifted so the grid origin
// (cell (0, 0) lower-left corner) sits at world (0, 0). Heights are
// piecewise-constant per cell.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stairclimb {

inline constexpr double kVoidHeight = -10.0;
inline constexpr int kHeightmapSide = 21;
inline constexpr int kHeightmapCells = kHeightmapSide * kHeightmapSide;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

enum class StairKind { Pyramid, Straight, LShaped, UShaped, Spiral };
enum class DifficultyMode { Train, Test };

inline std::string_view to_string(StairKind kind) {
  switch (kind) {
    case StairKind::Pyramid: return "pyramid";
    case StairKind::Straight: return "straight";
    case StairKind::LShaped: return "l_shaped";
    case StairKind::UShaped: return "u_shaped";
    case StairKind::Spiral: return "spiral";
  }
  return "unknown";
}

inline StairKind parse_stair_kind(std::string_view name) {
  for (auto k : {StairKind::Pyramid, StairKind::Straight, StairKind::LShaped,
                 StairKind::UShaped, StairKind::Spiral}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown stair kind: " + std::string(name));
}

inline std::string_view to_string(DifficultyMode mode) {
  return mode == DifficultyMode::Train ? "train" : "test";
}

inline DifficultyMode parse_difficulty_mode(std::string_view name) {
  if (name == "train") return DifficultyMode::Train;
  if (name == "test") return DifficultyMode::Test;
  throw std::invalid_argument("unknown difficulty mode: " + std::string(name));
}

inline int level_count(DifficultyMode mode) {
  return mode == DifficultyMode::Train ? 10 : 6;
}

struct StairSpec {
  StairKind kind = StairKind::Straight;
  double riser_height = 0.08;
  double tread_depth = 0.32;
  double stair_width = 1.2;
  int steps_per_run = 10;
  double landing_depth = 1.0;
  int runs = 1;
  double wall_height = 1.0;
  double spiral_inner_radius = 1.0;
  double spiral_total_turn = 1.5 * std::numbers::pi;

  void validate() const {
    if (!(riser_height > 0.0)) throw std::invalid_argument("riser_height must be > 0");
    if (!(tread_depth > 0.0)) throw std::invalid_argument("tread_depth must be > 0");
    if (!(stair_width > 0.0)) throw std::invalid_argument("stair_width must be > 0");
    if (steps_per_run < 1) throw std::invalid_argument("steps_per_run must be >= 1");
    if (!(landing_depth > 0.0)) throw std::invalid_argument("landing_depth must be > 0");
    if (wall_height < 0.0) throw std::invalid_argument("wall_height must be >= 0");
    if ((kind == StairKind::UShaped || kind == StairKind::LShaped) && runs != 2) {
      throw std::invalid_argument("L- and U-shaped stairs have exactly two runs");
    }
    if ((kind == StairKind::Straight || kind == StairKind::Pyramid ||
         kind == StairKind::Spiral) && runs != 1) {
      throw std::invalid_argument("straight, pyramid and spiral stairs have one run");
    }
    if (kind == StairKind::Spiral) {
      if (!(spiral_inner_radius > 0.0)) {
        throw std::invalid_argument("spiral_inner_radius must be > 0");
      }
      if (!(spiral_total_turn > 0.0) || spiral_total_turn > 1.6 * std::numbers::pi) {
        throw std::invalid_argument("spiral_total_turn must be in (0, 1.6*pi]");
      }
      if (steps_per_run < 2) throw std::invalid_argument("spiral needs >= 2 steps");
    }
  }
};

/// Linear riser/tread ramps mapping a curriculum level to stair dimensions.
/// Test values are offset so they never coincide with a training value.
struct DifficultyRamp {
  double train_riser_min = 0.08;
  double train_riser_max = 0.20;
  double train_tread_max = 0.32;
  double train_tread_min = 0.26;
  double test_riser_min = 0.09;
  double test_riser_max = 0.19;
  double test_tread_max = 0.31;
  double test_tread_min = 0.27;
};

/// Per-kind geometry defaults that the ramp does not touch.
inline StairSpec default_spec(StairKind kind) {
  StairSpec s;
  s.kind = kind;
  switch (kind) {
    case StairKind::Pyramid:
      s.steps_per_run = 6;
      s.runs = 1;
      s.wall_height = 0.0;
      break;
    case StairKind::Straight:
      s.steps_per_run = 10;
      s.runs = 1;
      break;
    case StairKind::LShaped:
    case StairKind::UShaped:
      s.steps_per_run = 9;
      s.runs = 2;
      break;
    case StairKind::Spiral:
      s.steps_per_run = 16;
      s.runs = 1;
      break;
  }
  return s;
}

inline StairSpec difficulty_to_spec(StairKind kind, int level, DifficultyMode mode,
                                    const DifficultyRamp& ramp = {}) {
  const int levels = level_count(mode);
  if (level < 1 || level > levels) {
    throw std::out_of_range("level " + std::to_string(level) + " outside 1.." +
                            std::to_string(levels) + " for mode " +
                            std::string(to_string(mode)));
  }
  StairSpec s = default_spec(kind);
  const double frac = static_cast<double>(level - 1) / static_cast<double>(levels - 1);
  if (mode == DifficultyMode::Train) {
    s.riser_height = ramp.train_riser_min + frac * (ramp.train_riser_max - ramp.train_riser_min);
    s.tread_depth = ramp.train_tread_max - frac * (ramp.train_tread_max - ramp.train_tread_min);
  } else {
    s.riser_height = ramp.test_riser_min + frac * (ramp.test_riser_max - ramp.test_riser_min);
    s.tread_depth = ramp.test_tread_max - frac * (ramp.test_tread_max - ramp.test_tread_min);
  }
  return s;
}

struct SpawnPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

struct GoalPose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double yaw = 0.0;
};

/// Polyline with cumulative arclength.
class Centerline {
 public:
  Centerline() = default;

  explicit Centerline(std::vector<Vec2> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("centerline needs a waypoint");
    arclength_.assign(points_.size(), 0.0);
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const double seg = norm(points_[i] - points_[i - 1]);
      if (!(seg > 0.0)) throw std::invalid_argument("centerline waypoints must be distinct");
      arclength_[i] = arclength_[i - 1] + seg;
    }
  }

  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<double>& arclength() const { return arclength_; }
  double length() const { return arclength_.empty() ? 0.0 : arclength_.back(); }
  bool empty() const { return points_.empty(); }

  Vec2 point_at(double s) const {
    if (points_.size() == 1 || s <= 0.0) return points_.front();
    for (std::size_t i = 1; i < points_.size(); ++i) {
      if (s <= arclength_[i]) {
        const double u = (s - arclength_[i - 1]) / (arclength_[i] - arclength_[i - 1]);
        return points_[i - 1] + u * (points_[i] - points_[i - 1]);
      }
    }
    return points_.back();
  }

 private:
  std::vector<Vec2> points_;
  std::vector<double> arclength_;
};

struct CenterlineProjection {
  double arclength = 0.0;
  double lateral_offset = 0.0;  // positive to the left of the travel direction
};

/// Discretized terrain plus the metadata the environment and evaluation use.
struct HeightField {
  StairSpec spec;
  std::uint64_t seed = 0;
  double cell_size = 0.05;
  int nx = 0;
  int ny = 0;
  std::vector<double> heights;     // row-major, index iy * nx + ix
  std::vector<std::uint8_t> wall;  // 1 where the cell belongs to a wall or column
  SpawnPose spawn;
  GoalPose goal;
  Centerline centerline;
  std::vector<Vec2> run_directions;  // unit ascent direction of each straight run

  double extent_x() const { return nx * cell_size; }
  double extent_y() const { return ny * cell_size; }
  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x < extent_x() && y < extent_y();
  }
  double at(int ix, int iy) const { return heights[static_cast<std::size_t>(iy) * nx + ix]; }
  bool is_wall(int ix, int iy) const {
    return wall[static_cast<std::size_t>(iy) * nx + ix] != 0;
  }
  int cell_x(double x) const { return static_cast<int>(std::floor(x / cell_size)); }
  int cell_y(double y) const { return static_cast<int>(std::floor(y / cell_size)); }
  bool cell_valid(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < nx && iy < ny; }
};

struct GeneratorLimits {
  int max_cells_per_axis = 1024;
  double margin = 1.0;
  double wall_thickness = 0.15;
  double apron_length = 1.0;
  double spawn_setback = 0.5;  // spawn distance before the first riser
  double cell_size = 0.05;
};

namespace detail {

struct Region {
  std::function<bool(Vec2)> contains;
  double xmin, ymin, xmax, ymax;
  double height;
  bool wall;
};

inline Region rect(double x0, double y0, double x1, double y1, double h, bool wall = false) {
  return Region{[=](Vec2 p) { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; },
                x0, y0, x1, y1, h, wall};
}

inline double angle_from(double a, double start) {
  double d = std::fmod(a - start, 2.0 * std::numbers::pi);
  if (d < 0.0) d += 2.0 * std::numbers::pi;
  return d;
}

// Annular sector spanning [a0, a0 + sweep) counter-clockwise.
inline Region sector(double r0, double r1, double a0, double sweep, double h, bool wall = false) {
  return Region{[=](Vec2 p) {
                  const double r = std::hypot(p.x, p.y);
                  if (r < r0 || r >= r1) return false;
                  return angle_from(std::atan2(p.y, p.x), a0) < sweep;
                },
                -r1, -r1, r1, r1, h, wall};
}

inline Region disk(double r, double h, bool wall) {
  return Region{[=](Vec2 p) { return std::hypot(p.x, p.y) < r; }, -r, -r, r, r, h, wall};
}

struct Layout {
  std::vector<Region> regions;  // painted in order; later regions win
  SpawnPose spawn;
  GoalPose goal;
  std::vector<Vec2> centerline;
  std::vector<Vec2> run_directions;
};

inline Layout layout_straight(const StairSpec& s, const GeneratorLimits& g) {
  const double w = s.stair_width, t = s.tread_depth, r = s.riser_height;
  const int n = s.steps_per_run;
  const double la = g.apron_length, T = g.wall_thickness;
  const double x1 = la + (n - 1) * t;
  const double xend = x1 + s.landing_depth;
  const double wall_h = n * r + s.wall_height;
  Layout L;
  L.regions.push_back(rect(0.0, 0.0, la, w, 0.0));
  for (int k = 1; k < n; ++k) {
    L.regions.push_back(rect(la + (k - 1) * t, 0.0, la + k * t, w, k * r));
  }
  L.regions.push_back(rect(x1, 0.0, xend, w, n * r));
  L.regions.push_back(rect(la, -T, xend + T, 0.0, wall_h, true));
  L.regions.push_back(rect(la, w, xend + T, w + T, wall_h, true));
  L.regions.push_back(rect(xend, -T, xend + T, w + T, wall_h, true));
  L.spawn = {la - g.spawn_setback, w / 2, 0.0};
  L.goal = {x1 + s.landing_depth / 2, w / 2, n * r, 0.0};
  L.centerline = {{L.spawn.x, L.spawn.y}, {L.goal.x, L.goal.y}};
  L.run_directions = {{1.0, 0.0}};
  return L;
}

inline Layout layout_u_shaped(const StairSpec& s, const GeneratorLimits& g) {
  const double w = s.stair_width, t = s.tread_depth, r = s.riser_height;
  const int n = s.steps_per_run;
  const double la = g.apron_length, T = g.wall_thickness, ld = s.landing_depth;
  const double x1 = la + (n - 1) * t;  // start of the middle landing
  const double xend = x1 + ld;
  const double lane_b = w + T;         // lower edge of the second lane
  const double top_x0 = x1 - (n - 1) * t - ld;
  const double wall_h = 2 * n * r + s.wall_height;
  Layout L;
  L.regions.push_back(rect(0.0, 0.0, la, w, 0.0));
  for (int k = 1; k < n; ++k) {
    L.regions.push_back(rect(la + (k - 1) * t, 0.0, la + k * t, w, k * r));
  }
  L.regions.push_back(rect(x1, 0.0, xend, lane_b + w, n * r));
  for (int k = 1; k < n; ++k) {
    L.regions.push_back(rect(x1 - k * t, lane_b, x1 - (k - 1) * t, lane_b + w, (n + k) * r));
  }
  L.regions.push_back(rect(top_x0, lane_b, x1 - (n - 1) * t, lane_b + w, 2 * n * r));
  const double wall_x0 = std::min(0.0, top_x0);
  L.regions.push_back(rect(la, -T, xend + T, 0.0, wall_h, true));
  L.regions.push_back(rect(top_x0, lane_b + w, xend + T, lane_b + w + T, wall_h, true));
  L.regions.push_back(rect(xend, -T, xend + T, lane_b + w + T, wall_h, true));
  L.regions.push_back(rect(wall_x0, w, x1, lane_b, wall_h, true));
  L.spawn = {la - g.spawn_setback, w / 2, 0.0};
  L.goal = {top_x0 + ld / 2, lane_b + w / 2, 2 * n * r, std::numbers::pi};
  const double turn_x = x1 + ld / 2;
  L.centerline = {{L.spawn.x, L.spawn.y},
                  {turn_x, w / 2},
                  {turn_x, lane_b + w / 2},
                  {L.goal.x, L.goal.y}};
  L.run_directions = {{1.0, 0.0}, {-1.0, 0.0}};
  return L;
}

inline Layout layout_l_shaped(const StairSpec& s, const GeneratorLimits& g) {
  const double w = s.stair_width, t = s.tread_depth, r = s.riser_height;
  const int n = s.steps_per_run;
  const double la = g.apron_length, T = g.wall_thickness, ld = s.landing_depth;
  const double x1 = la + (n - 1) * t;
  const double y1 = w + (n - 1) * t;  // start of the top landing
  const double yend = y1 + ld;
  const double wall_h = 2 * n * r + s.wall_height;
  Layout L;
  L.regions.push_back(rect(0.0, 0.0, la, w, 0.0));
  for (int k = 1; k < n; ++k) {
    L.regions.push_back(rect(la + (k - 1) * t, 0.0, la + k * t, w, k * r));
  }
  L.regions.push_back(rect(x1, 0.0, x1 + w, w, n * r));
  for (int k = 1; k < n; ++k) {
    L.regions.push_back(rect(x1, w + (k - 1) * t, x1 + w, w + k * t, (n + k) * r));
  }
  L.regions.push_back(rect(x1, y1, x1 + w, yend, 2 * n * r));
  L.regions.push_back(rect(la, -T, x1 + w + T, 0.0, wall_h, true));
  L.regions.push_back(rect(x1 + w, -T, x1 + w + T, yend + T, wall_h, true));
  L.regions.push_back(rect(la, w, x1, w + T, wall_h, true));
  L.regions.push_back(rect(x1 - T, w, x1, yend + T, wall_h, true));
  L.regions.push_back(rect(x1 - T, yend, x1 + w + T, yend + T, wall_h, true));
  L.spawn = {la - g.spawn_setback, w / 2, 0.0};
  L.goal = {x1 + w / 2, y1 + ld / 2, 2 * n * r, std::numbers::pi / 2};
  L.centerline = {{L.spawn.x, L.spawn.y}, {x1 + w / 2, w / 2}, {L.goal.x, L.goal.y}};
  L.run_directions = {{1.0, 0.0}, {0.0, 1.0}};
  return L;
}

// Steps swept counter-clockwise around a central column. The apron and the
// top landing are sectors of the same annulus, separated by a radial wall.
inline Layout layout_spiral(const StairSpec& s, const GeneratorLimits& g) {
  const double w = s.stair_width, r = s.riser_height;
  const int n = s.steps_per_run;
  const double ri = s.spiral_inner_radius, ro = ri + w, T = g.wall_thickness;
  const double rmid = 0.5 * (ri + ro);
  const double step_sweep = s.spiral_total_turn / (n - 1);
  const double apron_sweep = g.apron_length / rmid;
  const double landing_sweep = s.landing_depth / rmid;
  const double used = apron_sweep + s.spiral_total_turn + landing_sweep;
  const double gap = 2.0 * std::numbers::pi - used;
  if (gap < T / ri) {
    throw std::invalid_argument("spiral sweep leaves no room for the separating wall");
  }
  const double a_apron = -std::numbers::pi / 2 - apron_sweep;
  const double a_steps = -std::numbers::pi / 2;
  const double a_landing = a_steps + s.spiral_total_turn;
  const double a_sep = a_landing + landing_sweep;
  const double wall_h = n * r + s.wall_height;
  Layout L;
  L.regions.push_back(sector(ri, ro, a_apron, apron_sweep, 0.0));
  for (int k = 1; k < n; ++k) {
    L.regions.push_back(sector(ri, ro, a_steps + (k - 1) * step_sweep, step_sweep, k * r));
  }
  L.regions.push_back(sector(ri, ro, a_landing, landing_sweep, n * r));
  L.regions.push_back(sector(ri, ro + T, a_sep, gap, wall_h, true));
  // Outer wall everywhere except along the apron, which stays open.
  L.regions.push_back(sector(ro, ro + T, a_steps, a_sep - a_steps, wall_h, true));
  L.regions.push_back(disk(ri, wall_h, true));

  const double a_spawn = a_steps - g.spawn_setback / rmid;
  L.spawn = {rmid * std::cos(a_spawn), rmid * std::sin(a_spawn), a_spawn + std::numbers::pi / 2};
  const double a_goal = a_landing + 0.5 * landing_sweep;
  L.goal = {rmid * std::cos(a_goal), rmid * std::sin(a_goal), n * r,
            wrap_angle(a_goal + std::numbers::pi / 2)};
  const int samples = std::max(2, static_cast<int>(std::ceil((a_goal - a_spawn) / 0.05)));
  for (int i = 0; i <= samples; ++i) {
    const double a = a_spawn + (a_goal - a_spawn) * i / samples;
    L.centerline.push_back({rmid * std::cos(a), rmid * std::sin(a)});
  }
  const double a_mid = a_steps + 0.5 * s.spiral_total_turn;
  L.run_directions = {{-std::sin(a_mid), std::cos(a_mid)}};
  return L;
}

// Concentric square steps rising toward a square top platform.
inline Layout layout_pyramid(const StairSpec& s, const GeneratorLimits& g) {
  const double t = s.tread_depth, r = s.riser_height;
  const int n = s.steps_per_run;
  const double half_top = s.landing_depth / 2;
  const double outer = half_top + (n - 1) * t;
  Layout L;
  L.regions.push_back(rect(-outer - g.apron_length, -outer, outer, outer, 0.0));
  for (int k = 1; k < n; ++k) {
    const double d = half_top + (n - k) * t;
    L.regions.push_back(rect(-d, -d, d, d, k * r));
  }
  L.regions.push_back(rect(-half_top, -half_top, half_top, half_top, n * r));
  L.spawn = {-outer - g.spawn_setback, 0.0, 0.0};
  L.goal = {0.0, 0.0, n * r, 0.0};
  L.centerline = {{L.spawn.x, L.spawn.y}, {0.0, 0.0}};
  L.run_directions = {{1.0, 0.0}};
  return L;
}

}  // namespace detail

inline double sample_height(const HeightField& hf, double x, double y) {
  if (!hf.contains(x, y)) return kVoidHeight;
  const int ix = std::min(hf.cell_x(x), hf.nx - 1);
  const int iy = std::min(hf.cell_y(y), hf.ny - 1);
  return hf.at(ix, iy);
}

inline bool is_wall_at(const HeightField& hf, double x, double y) {
  if (!hf.contains(x, y)) return false;
  return hf.is_wall(std::min(hf.cell_x(x), hf.nx - 1), std::min(hf.cell_y(y), hf.ny - 1));
}

/// Builds the heightfield for `spec`. The geometry carries no randomness;
/// `seed` is recorded so callers can key caches and manifests on it.
inline HeightField generate(const StairSpec& spec, std::uint64_t seed,
                            const GeneratorLimits& limits = {}) {
  spec.validate();
  detail::Layout layout;
  switch (spec.kind) {
    case StairKind::Straight: layout = detail::layout_straight(spec, limits); break;
    case StairKind::UShaped: layout = detail::layout_u_shaped(spec, limits); break;
    case StairKind::LShaped: layout = detail::layout_l_shaped(spec, limits); break;
    case StairKind::Spiral: layout = detail::layout_spiral(spec, limits); break;
    case StairKind::Pyramid: layout = detail::layout_pyramid(spec, limits); break;
  }

  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const auto& reg : layout.regions) {
    xmin = std::min(xmin, reg.xmin);
    ymin = std::min(ymin, reg.ymin);
    xmax = std::max(xmax, reg.xmax);
    ymax = std::max(ymax, reg.ymax);
  }
  const double cell = limits.cell_size;
  // Snap the shift to whole cells so region edges stay aligned to cell borders.
  const double ox = std::floor((xmin - limits.margin) / cell) * cell;
  const double oy = std::floor((ymin - limits.margin) / cell) * cell;
  const int nx = static_cast<int>(std::ceil((xmax + limits.margin - ox) / cell - 1e-9));
  const int ny = static_cast<int>(std::ceil((ymax + limits.margin - oy) / cell - 1e-9));
  if (nx > limits.max_cells_per_axis || ny > limits.max_cells_per_axis) {
    throw std::length_error("stair footprint " + std::to_string(nx) + "x" + std::to_string(ny) +
                            " cells exceeds the configured maximum of " +
                            std::to_string(limits.max_cells_per_axis) + " per axis");
  }

  HeightField hf;
  hf.spec = spec;
  hf.seed = seed;
  hf.cell_size = cell;
  hf.nx = nx;
  hf.ny = ny;
  hf.heights.assign(static_cast<std::size_t>(nx) * ny, 0.0);
  hf.wall.assign(hf.heights.size(), 0);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const Vec2 p{ox + (ix + 0.5) * cell, oy + (iy + 0.5) * cell};
      const std::size_t idx = static_cast<std::size_t>(iy) * nx + ix;
      for (const auto& reg : layout.regions) {
        if (p.x < reg.xmin || p.x >= reg.xmax || p.y < reg.ymin || p.y >= reg.ymax) continue;
        if (reg.contains(p)) {
          hf.heights[idx] = reg.height;
          hf.wall[idx] = reg.wall ? 1 : 0;
        }
      }
    }
  }

  const Vec2 shift{-ox, -oy};
  hf.spawn = {layout.spawn.x + shift.x, layout.spawn.y + shift.y, layout.spawn.yaw};
  hf.goal = {layout.goal.x + shift.x, layout.goal.y + shift.y, 0.0, layout.goal.yaw};
  hf.goal.z = sample_height(hf, hf.goal.x, hf.goal.y);
  std::vector<Vec2> pts;
  pts.reserve(layout.centerline.size());
  for (auto p : layout.centerline) pts.push_back(p + shift);
  hf.centerline = Centerline(std::move(pts));
  hf.run_directions = layout.run_directions;
  return hf;
}

/// Heights on a yaw-aligned 21x21 lattice around (x, y), relative to z_base.
/// Row index increases along the forward (heading) axis, columns along the
/// body's left axis; the centre cell (10, 10) sits at the query point.
inline std::array<double, kHeightmapCells> local_heightmap(const HeightField& hf, double x,
                                                           double y, double z_base, double yaw,
                                                           double spacing = 0.10) {
  std::array<double, kHeightmapCells> out{};
  const double c = std::cos(yaw), s = std::sin(yaw);
  constexpr int half = kHeightmapSide / 2;
  for (int row = 0; row < kHeightmapSide; ++row) {
    const double fwd = (row - half) * spacing;
    for (int col = 0; col < kHeightmapSide; ++col) {
      const double left = (col - half) * spacing;
      const double wx = x + c * fwd - s * left;
      const double wy = y + s * fwd + c * left;
      out[static_cast<std::size_t>(row) * kHeightmapSide + col] =
          sample_height(hf, wx, wy) - z_base;
    }
  }
  return out;
}

inline CenterlineProjection centerline_progress(const Centerline& line, double x, double y) {
  if (line.empty()) throw std::invalid_argument("empty centerline");
  const auto& pts = line.points();
  const auto& arc = line.arclength();
  const Vec2 p{x, y};
  if (pts.size() == 1) return {0.0, norm(p - pts[0])};
  CenterlineProjection best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec2 a = pts[i - 1], d = pts[i] - pts[i - 1];
    const double len = arc[i] - arc[i - 1];
    const double u = std::clamp(dot(p - a, d) / (len * len), 0.0, 1.0);
    const Vec2 q = a + u * d;
    const double dist = norm(p - q);
    if (dist < best_dist - 1e-12) {
      best_dist = dist;
      best.arclength = arc[i - 1] + u * len;
      // Signed distance; past a vertex the perpendicular component alone would undershoot.
      best.lateral_offset = cross(d, p - a) < 0.0 ? -dist : dist;
    }
  }
  return best;
}

inline CenterlineProjection centerline_progress(const HeightField& hf, double x, double y) {
  return centerline_progress(hf.centerline, x, y);
}

/// Unit direction of steepest ascent around (x, y) from central differences,
/// ignoring wall cells and the void so only stair geometry counts.
/// Returns {0, 0} on flat ground.
inline Vec2 ascent_direction(const HeightField& hf, double x, double y) {
  if (!hf.contains(x, y)) return {};
  const int ix = std::min(hf.cell_x(x), hf.nx - 1);
  const int iy = std::min(hf.cell_y(y), hf.ny - 1);
  const double h0 = hf.at(ix, iy);
  auto h = [&](int jx, int jy) {
    if (!hf.cell_valid(jx, jy) || hf.is_wall(jx, jy)) return h0;
    return hf.at(jx, jy);
  };
  const Vec2 g{h(ix + 1, iy) - h(ix - 1, iy), h(ix, iy + 1) - h(ix, iy - 1)};
  const double n = norm(g);
  if (n < 1e-12) return {};
  return {g.x / n, g.y / n};
}

}  // namespace stairclimb
