#pragma once

// Evaluation: per-level success rates with the deterministic policy, table
// arithmetic, cross-terrain matrices and critic-value heatmaps.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "env.hpp"
#include "grid_io.hpp"
#include "net.hpp"
#include "parallel.hpp"
#include "ppo.hpp"

namespace stairclimb {

struct LevelResult {
  StairKind kind = StairKind::Straight;
  DifficultyMode mode = DifficultyMode::Test;
  int level = 1;
  double riser_height = 0.0;
  double tread_depth = 0.0;
  int episodes = 0;
  int successes = 0;
  long slow_steps = 0;
  long steps = 0;
  std::array<int, 5> events{};  // indexed by StepEvent

  /// Percent of episodes that ended GoalReached.
  double success_pct() const { return episodes > 0 ? 100.0 * successes / episodes : 0.0; }
};

struct EvalOptions {
  EnvConfig env;
  RewardConfig rewards;
  int episodes = 300;
  std::uint64_t seed = 1;
  int workers = 1;
  int trajectory_episodes = 0;  // dump this many episodes when a directory is given
  std::filesystem::path trajectory_dir;
};

inline std::uint64_t eval_episode_seed(std::uint64_t seed, int episode) {
  return splitmix64(seed ^ splitmix64(0xE7A1ULL << 32 | static_cast<std::uint64_t>(episode)));
}

/// Runs `episodes` seeded episodes with mean actions and counts goal reaches.
inline LevelResult evaluate_level(const ActorCritic<float>& net, const TerrainSet& terrains,
                                  StairKind kind, DifficultyMode mode, int level,
                                  const EvalOptions& opt) {
  if (opt.episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  using Mat = ActorCritic<float>::Mat;
  const HeightField& hf = terrains.get(kind, mode, level);
  LevelResult res;
  res.kind = kind;
  res.mode = mode;
  res.level = level;
  res.riser_height = hf.spec.riser_height;
  res.tread_depth = hf.spec.tread_depth;
  res.episodes = opt.episodes;

  const int E = opt.episodes;
  std::vector<StairEnv> envs;
  envs.reserve(static_cast<std::size_t>(E));
  std::vector<Observation> obs(static_cast<std::size_t>(E));
  for (int e = 0; e < E; ++e) {
    envs.emplace_back(terrains, opt.env, opt.rewards, mode, e);
    obs[e] = envs.back().reset(kind, level, eval_episode_seed(opt.seed, e));
  }
  std::vector<StepResult> results(static_cast<std::size_t>(E));
  std::vector<int> active(static_cast<std::size_t>(E));
  std::iota(active.begin(), active.end(), 0);

  std::vector<std::ofstream> traj;
  if (!opt.trajectory_dir.empty() && opt.trajectory_episodes > 0) {
    std::filesystem::create_directories(opt.trajectory_dir);
    for (int e = 0; e < std::min(E, opt.trajectory_episodes); ++e) {
      const auto path = opt.trajectory_dir / ("traj_" + std::string(to_string(kind)) + "_" +
                                              std::string(to_string(mode)) + "_L" +
                                              std::to_string(level) + "_ep" + std::to_string(e) + ".csv");
      auto& f = traj.emplace_back(path);
      if (!f) throw std::runtime_error("cannot write " + path.string());
      f << "t,x,y,z,yaw,speed,event\n" << std::setprecision(9);
      const auto& s = envs[e].state();
      f << 0 << ',' << s.x << ',' << s.y << ',' << s.z << ',' << s.yaw << ",0,running\n";
    }
  }

  Mat batch, mean;
  std::vector<double> value;
  while (!active.empty()) {
    const int n = static_cast<int>(active.size());
    batch.resize(n, kObsDim);
    for (int k = 0; k < n; ++k) {
      batch.row(k) = Eigen::Map<const Eigen::RowVectorXf>(obs[active[k]].values.data(), kObsDim);
    }
    infer(net, batch, mean, value, opt.workers);
    const int chunks = (n + kInferenceChunk - 1) / kInferenceChunk;
    parallel_for(chunks, opt.workers, [&](int c) {
      for (int k = c * kInferenceChunk; k < std::min(n, (c + 1) * kInferenceChunk); ++k) {
        const int e = active[k];
        std::array<double, kActionDim> a{};
        for (int j = 0; j < kActionDim; ++j) a[j] = mean(k, j);
        results[e] = envs[e].step(a);
        if (!is_terminal(results[e].event)) obs[e] = envs[e].observe();
      }
    });
    std::vector<int> still;
    still.reserve(active.size());
    for (int e : active) {
      const auto& r = results[e];
      ++res.steps;
      if (r.speed < opt.rewards.stall_speed_threshold && !r.in_goal_region) ++res.slow_steps;
      if (static_cast<std::size_t>(e) < traj.size()) {
        const auto& s = envs[e].state();
        traj[e] << s.step_count << ',' << s.x << ',' << s.y << ',' << s.z << ',' << s.yaw << ','
                << r.speed << ',' << to_string(r.event) << '\n';
      }
      if (is_terminal(r.event)) {
        ++res.events[static_cast<std::size_t>(r.event)];
        if (r.event == StepEvent::GoalReached) ++res.successes;
      } else {
        still.push_back(e);
      }
    }
    active.swap(still);
  }
  return res;
}

/// Mean of the level-3 and level-4 success rates.
inline double total_success(double s_level3, double s_level4) { return 0.5 * (s_level3 + s_level4); }

/// 100 * s_transfer / s_target_trained; empty when the denominator is not positive.
inline std::optional<double> transferability(double s_transfer, double s_target_trained) {
  if (!(s_target_trained > 0.0)) return std::nullopt;
  return 100.0 * s_transfer / s_target_trained;
}

/// Rounds to the precision the transfer CSV prints.
inline double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

inline constexpr int kTableDecimals = 4;

struct TransferRow {
  std::string model;
  StairKind trained_on = StairKind::Straight;
  StairKind terrain = StairKind::Straight;
  bool present = true;
  double s_level3 = 0.0;
  double s_level4 = 0.0;
  double total = 0.0;
  std::optional<double> transferability;
};

struct NamedModel {
  std::string name;
  StairKind trained_on = StairKind::Straight;
  std::optional<ActorCritic<float>> net;  // empty when the checkpoint is missing
};

/// Fills derived columns from the (rounded) per-level columns so the CSV is
/// self-consistent. The denominator per terrain is the total of the model
/// trained on that terrain; the own-terrain cell is N/A.
inline void finalize_transfer_rows(std::vector<TransferRow>& rows) {
  for (auto& r : rows) {
    if (!r.present) continue;
    r.s_level3 = round_to(r.s_level3, kTableDecimals);
    r.s_level4 = round_to(r.s_level4, kTableDecimals);
    r.total = round_to(total_success(r.s_level3, r.s_level4), kTableDecimals);
  }
  for (auto& r : rows) {
    r.transferability.reset();
    if (!r.present || r.trained_on == r.terrain) continue;
    for (const auto& own : rows) {
      if (own.present && own.trained_on == r.terrain && own.terrain == r.terrain) {
        r.transferability = transferability(r.total, own.total);
        break;
      }
    }
  }
}

inline std::vector<TransferRow> cross_matrix(const std::vector<NamedModel>& models,
                                             const std::vector<StairKind>& terrains,
                                             const TerrainSet& terrain_set,
                                             const EvalOptions& opt, int level_a = 3,
                                             int level_b = 4) {
  std::vector<TransferRow> rows;
  for (const auto& m : models) {
    for (StairKind t : terrains) {
      TransferRow r;
      r.model = m.name;
      r.trained_on = m.trained_on;
      r.terrain = t;
      r.present = m.net.has_value();
      if (r.present) {
        r.s_level3 = evaluate_level(*m.net, terrain_set, t, DifficultyMode::Test, level_a, opt).success_pct();
        r.s_level4 = evaluate_level(*m.net, terrain_set, t, DifficultyMode::Test, level_b, opt).success_pct();
      }
      rows.push_back(r);
    }
  }
  finalize_transfer_rows(rows);
  return rows;
}

inline std::string format_fixed(double v, int decimals = kTableDecimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << v;
  return os.str();
}

inline void write_transfer_csv(const std::filesystem::path& path, const std::vector<TransferRow>& rows) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "model,terrain,s_level3,s_level4,total,transferability\n";
  for (const auto& r : rows) {
    out << r.model << ',' << to_string(r.terrain) << ',';
    if (!r.present) {
      out << "absent,absent,absent,absent\n";
      continue;
    }
    out << format_fixed(r.s_level3) << ',' << format_fixed(r.s_level4) << ','
        << format_fixed(r.total) << ','
        << (r.transferability ? format_fixed(*r.transferability) : std::string("N/A")) << '\n';
  }
}

// Critic heatmap.

enum class YawMode { FaceGoal, Fixed };

struct HeatmapOptions {
  double spacing = 0.1;
  YawMode yaw_mode = YawMode::FaceGoal;
  double fixed_yaw = 0.0;
  int workers = 1;
};

struct Heatmap {
  int nx = 0, ny = 0;
  double spacing = 0.1;
  std::vector<double> values;  // iy * nx + ix, NaN where off-grid
  double x_at(int ix) const { return (ix + 0.5) * spacing; }
  double y_at(int iy) const { return (iy + 0.5) * spacing; }
  double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * nx + ix]; }
};

/// Base state used to probe the critic: at rest, nominal joints, zero
/// previous action, standing on the terrain at (x, y).
inline AgentState probe_state(const HeightField& hf, double x, double y, double yaw,
                              const EnvConfig& cfg) {
  AgentState st;
  st.x = x;
  st.y = y;
  st.z = sample_height(hf, x, y) + cfg.stand_height;
  st.yaw = yaw;
  return st;
}

inline Heatmap critic_heatmap(const ActorCritic<float>& net, const HeightField& hf,
                              const EnvConfig& cfg, const HeatmapOptions& opt) {
  if (!(opt.spacing > 0.0)) throw std::invalid_argument("heatmap spacing must be > 0");
  Heatmap map;
  map.spacing = opt.spacing;
  map.nx = static_cast<int>(std::ceil(hf.extent_x() / opt.spacing - 1e-9));
  map.ny = static_cast<int>(std::ceil(hf.extent_y() / opt.spacing - 1e-9));
  map.values.assign(static_cast<std::size_t>(map.nx) * map.ny, std::numeric_limits<double>::quiet_NaN());

  std::vector<std::size_t> index;
  std::vector<Observation> obs;
  for (int iy = 0; iy < map.ny; ++iy) {
    for (int ix = 0; ix < map.nx; ++ix) {
      const double x = map.x_at(ix), y = map.y_at(iy);
      if (!hf.contains(x, y)) continue;
      double yaw = opt.fixed_yaw;
      if (opt.yaw_mode == YawMode::FaceGoal) {
        const double gx = hf.goal.x - x, gy = hf.goal.y - y;
        yaw = std::hypot(gx, gy) > 1e-9 ? std::atan2(gy, gx) : hf.goal.yaw;
      }
      index.push_back(static_cast<std::size_t>(iy) * map.nx + ix);
      obs.push_back(make_observation(hf, probe_state(hf, x, y, yaw, cfg), cfg));
    }
  }
  ActorCritic<float>::Mat batch(static_cast<Eigen::Index>(obs.size()), kObsDim), mean;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    batch.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::RowVectorXf>(obs[k].values.data(), kObsDim);
  }
  std::vector<double> value;
  infer(net, batch, mean, value, opt.workers);
  for (std::size_t k = 0; k < index.size(); ++k) map.values[index[k]] = value[k];
  return map;
}

/// Lattice points standing on walkable terrain (neither wall nor void).
inline bool walkable(const HeightField& hf, double x, double y) {
  return hf.contains(x, y) && !is_wall_at(hf, x, y) && sample_height(hf, x, y) > kVoidHeight;
}

/// Walkable lattice points within the goal tolerance radius of the goal.
inline std::vector<std::size_t> goal_adjacent_cells(const Heatmap& map, const HeightField& hf,
                                                    double goal_radius) {
  std::vector<std::size_t> out;
  for (int iy = 0; iy < map.ny; ++iy) {
    for (int ix = 0; ix < map.nx; ++ix) {
      const double x = map.x_at(ix), y = map.y_at(iy);
      if (walkable(hf, x, y) && std::hypot(x - hf.goal.x, y - hf.goal.y) <= goal_radius) {
        out.push_back(static_cast<std::size_t>(iy) * map.nx + ix);
      }
    }
  }
  return out;
}

/// Walkable lattice points with a wall cell within `radius`.
inline std::vector<std::size_t> wall_adjacent_cells(const Heatmap& map, const HeightField& hf,
                                                    double radius) {
  std::vector<std::size_t> out;
  const int reach = static_cast<int>(std::ceil(radius / hf.cell_size));
  for (int iy = 0; iy < map.ny; ++iy) {
    for (int ix = 0; ix < map.nx; ++ix) {
      const double x = map.x_at(ix), y = map.y_at(iy);
      if (!walkable(hf, x, y)) continue;
      const int cx = hf.cell_x(x), cy = hf.cell_y(y);
      bool near = false;
      for (int dy = -reach; dy <= reach && !near; ++dy) {
        for (int dx = -reach; dx <= reach && !near; ++dx) {
          const int gx = cx + dx, gy = cy + dy;
          if (gx < 0 || gy < 0 || gx >= hf.nx || gy >= hf.ny) continue;
          if (!hf.is_wall(gx, gy)) continue;
          near = std::hypot((gx + 0.5) * hf.cell_size - x, (gy + 0.5) * hf.cell_size - y) <= radius;
        }
      }
      if (near) out.push_back(static_cast<std::size_t>(iy) * map.nx + ix);
    }
  }
  return out;
}

inline double mean_over(const Heatmap& map, const std::vector<std::size_t>& cells) {
  if (cells.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (auto c : cells) s += map.values[c];
  return s / static_cast<double>(cells.size());
}

struct HeatmapFiles {
  std::filesystem::path csv, pgm, json;
};

inline HeatmapFiles write_heatmap(const Heatmap& map, const HeightField& hf,
                                  const std::filesystem::path& dir, const std::string& terrain,
                                  const HeatmapOptions& opt) {
  HeatmapFiles f{dir / ("heatmap_" + terrain + ".csv"), dir / ("heatmap_" + terrain + ".pgm"),
                 dir / ("heatmap_" + terrain + ".json")};
  const GridView view{map.nx, map.ny, map.values};
  write_grid_csv(f.csv, view, 0.5 * map.spacing, map.spacing);
  const PgmScale scale = write_grid_pgm(f.pgm, view);
  write_json(f.json, {{"terrain", terrain},
                      {"origin", {0.5 * map.spacing, 0.5 * map.spacing}},
                      {"spacing", map.spacing},
                      {"nx", map.nx},
                      {"ny", map.ny},
                      {"yaw_mode", opt.yaw_mode == YawMode::FaceGoal ? "face_goal" : "fixed"},
                      {"fixed_yaw", opt.fixed_yaw},
                      {"goal", {hf.goal.x, hf.goal.y, hf.goal.z, hf.goal.yaw}},
                      {"pgm_offset", scale.offset},
                      {"pgm_scale", scale.scale}});
  return f;
}

}  // namespace stairclimb
