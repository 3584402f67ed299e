#pragma once

// End-to-end runs shared by the command-line tool and the tests: training
// with metrics and checkpoints, level sweeps, transfer matrices, heatmaps.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "eval.hpp"
#include "ppo.hpp"
#include "terrain_io.hpp"

namespace stairclimb {

struct TrainSummary {
  int iterations_run = 0;
  long slow_steps = 0;
  long steps = 0;
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics_csv;

  double slow_fraction() const { return steps > 0 ? static_cast<double>(slow_steps) / steps : 0.0; }
};

inline std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir,
                                             TrainingStage stage, int iteration) {
  std::ostringstream name;
  name << to_string(stage) << "_iter" << std::setw(5) << std::setfill('0') << iteration << ".json";
  return out_dir / "checkpoints" / name.str();
}

inline std::filesystem::path final_checkpoint_path(const std::filesystem::path& out_dir,
                                                   TrainingStage stage) {
  return out_dir / "checkpoints" / (std::string(to_string(stage)) + "_final.json");
}

/// Trains per `cfg`, writing resolved_config.json, metrics.csv,
/// checkpoints/<stage>_iter<N>.json (N = 0 holds the initial parameters)
/// and checkpoints/<stage>_final.json into cfg.out_dir.
inline TrainSummary run_training(const RunConfig& cfg, int workers,
                                 std::optional<ActorCritic<float>> warm_start = std::nullopt,
                                 std::ostream* log = nullptr) {
  const std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out / "checkpoints");
  write_json(out / "resolved_config.json", nlohmann::json(cfg));

  TerrainSet terrains(cfg.ramp, cfg.limits, cfg.seed);
  terrains.add(cfg.terrain_kind, DifficultyMode::Train);
  PpoTrainer trainer(terrains, cfg.trainer_options(workers), std::move(warm_start));

  CheckpointMeta meta{cfg.seed, std::string(to_string(cfg.stage)),
                      std::string(to_string(cfg.terrain_kind)), 0};
  save_checkpoint(trainer.net(), meta, checkpoint_path(out, cfg.stage, 0));

  TrainSummary summary;
  summary.metrics_csv = out / "metrics.csv";
  std::ofstream csv(summary.metrics_csv);
  if (!csv) throw std::runtime_error("cannot write " + summary.metrics_csv.string());
  const auto cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) csv << (i ? "," : "") << cols[i];
  csv << '\n';

  int streak = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    const IterationStats s = trainer.run_iteration();
    csv << metrics_row(s, cfg.record_wall_time) << '\n';
    csv.flush();
    summary.slow_steps += s.slow_steps;
    summary.steps += s.steps;
    summary.iterations_run = it + 1;
    if (log != nullptr) {
      *log << "iter " << s.iteration << " success " << s.success_rate << " level " << s.mean_level
           << " slow " << s.slow_fraction << " loss " << s.loss.total << '\n';
    }
    meta.iteration = it + 1;
    if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(trainer.net(), meta, checkpoint_path(out, cfg.stage, it + 1));
    }
    if (cfg.stop_success_rate > 0.0) {
      const bool good = s.episodes > 0 && s.success_rate >= cfg.stop_success_rate;
      streak = good ? streak + 1 : 0;
      if (streak >= cfg.stop_patience) break;
    }
  }
  summary.final_checkpoint = final_checkpoint_path(out, cfg.stage);
  save_checkpoint(trainer.net(), meta, summary.final_checkpoint);
  write_json(out / "train_summary.json", {{"iterations_run", summary.iterations_run},
                                          {"slow_steps", summary.slow_steps},
                                          {"steps", summary.steps},
                                          {"slow_fraction", summary.slow_fraction()},
                                          {"final_checkpoint", summary.final_checkpoint.filename().string()}});
  return summary;
}

/// Parses "a..b" or a comma list such as "3,4".
inline std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> out;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size()) throw std::invalid_argument("bad level list '" + text + "'");
    return v;
  };
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const int a = to_int(text.substr(0, dots)), b = to_int(text.substr(dots + 2));
    if (b < a) throw std::invalid_argument("bad level range '" + text + "'");
    for (int l = a; l <= b; ++l) out.push_back(l);
    return out;
  }
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(to_int(item));
  if (out.empty()) throw std::invalid_argument("empty level list");
  return out;
}

inline std::vector<LevelResult> evaluate_levels(const ActorCritic<float>& net, const RunConfig& cfg,
                                                StairKind kind, DifficultyMode mode,
                                                const std::vector<int>& levels, int workers) {
  TerrainSet terrains(cfg.ramp, cfg.limits, cfg.seed);
  terrains.add(kind, mode);
  std::vector<LevelResult> out;
  for (int level : levels) {
    if (level < 1 || level > level_count(mode)) {
      throw std::out_of_range("level " + std::to_string(level) + " outside 1.." +
                              std::to_string(level_count(mode)));
    }
    out.push_back(evaluate_level(net, terrains, kind, mode, level, cfg.eval_options(workers)));
  }
  return out;
}

inline void write_levels_csv(const std::filesystem::path& path, const std::vector<LevelResult>& rows) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "terrain,mode,level,riser_height,tread_depth,episodes,successes,success_rate,"
         "fell,out_of_bounds,timeout,slow_fraction\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << to_string(r.kind) << ',' << to_string(r.mode) << ',' << r.level << ','
        << r.riser_height << ',' << r.tread_depth << ',' << r.episodes << ',' << r.successes << ','
        << format_fixed(r.success_pct()) << ','
        << r.events[static_cast<std::size_t>(StepEvent::Fell)] << ','
        << r.events[static_cast<std::size_t>(StepEvent::OutOfBounds)] << ','
        << r.events[static_cast<std::size_t>(StepEvent::Timeout)] << ','
        << (r.steps > 0 ? static_cast<double>(r.slow_steps) / r.steps : 0.0) << '\n';
  }
}

inline HeatmapOptions heatmap_options(const RunConfig& cfg, int workers) {
  HeatmapOptions o;
  o.spacing = cfg.eval.heatmap_spacing;
  o.yaw_mode = cfg.eval.heatmap_yaw == "fixed" ? YawMode::Fixed : YawMode::FaceGoal;
  o.fixed_yaw = cfg.eval.heatmap_fixed_yaw;
  o.workers = workers;
  return o;
}

}  // namespace stairclimb
