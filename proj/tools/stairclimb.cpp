// stairclimb: terrain generation, training, evaluation, transfer matrices and
// critic heatmaps. Exit codes: 0 success, 2 usage/config error, 3 runtime failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stairclimb/checkpoint.hpp"
#include "stairclimb/config.hpp"
#include "stairclimb/eval.hpp"
#include "stairclimb/pipeline.hpp"
#include "stairclimb/terrain_io.hpp"

namespace fs = std::filesystem;
using namespace stairclimb;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw UsageError("empty list '" + text + "'");
  return out;
}

StairKind kind_arg(const std::string& s) {
  try {
    return parse_stair_kind(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

DifficultyMode mode_arg(const std::string& s) {
  try {
    return parse_difficulty_mode(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

RunConfig config_arg(const std::string& path) {
  return load_run_config(path.empty() ? std::nullopt : std::optional<fs::path>(path));
}

LoadedCheckpoint checkpoint_arg(const std::string& path) {
  if (!fs::is_regular_file(path)) throw std::runtime_error("checkpoint not found: " + path);
  return load_checkpoint(path);
}

std::string model_name(const fs::path& manifest) {
  if (manifest.parent_path().filename() == "checkpoints" &&
      !manifest.parent_path().parent_path().filename().empty()) {
    return manifest.parent_path().parent_path().filename().string();
  }
  return manifest.stem().string();
}

struct Options {
  int workers = 1;
  std::string config;
  // gen-terrain
  std::string kind, mode = "train", out;
  int level = 0;
  std::optional<std::uint64_t> seed;
  // train
  std::string stage, warm_start;
  std::optional<int> iterations;
  // eval / heatmap / transfer
  std::string checkpoint, terrain, levels = "1..6", models, terrains, yaw;
  std::optional<int> episodes;
  std::optional<double> spacing, fixed_yaw;
  int trajectories = 0;
};

int cmd_gen_terrain(const Options& o) {
  const RunConfig cfg = config_arg(o.config);
  const StairKind kind = kind_arg(o.kind);
  const DifficultyMode mode = mode_arg(o.mode);
  if (o.level < 1 || o.level > level_count(mode)) {
    throw UsageError("--level must be in 1.." + std::to_string(level_count(mode)) + " for mode " +
                     o.mode);
  }
  const std::uint64_t seed = o.seed.value_or(cfg.seed);
  const StairSpec spec = difficulty_to_spec(kind, o.level, mode, cfg.ramp);
  const HeightField hf = generate(spec, seed, cfg.limits);
  const std::string stem = std::string(to_string(kind)) + "_" + o.mode + "_L" + std::to_string(o.level);
  const auto paths = export_heightfield(hf, o.out, stem);
  std::cout << paths.csv.string() << '\n' << paths.pgm.string() << '\n' << paths.manifest.string() << '\n';
  return kExitOk;
}

int cmd_train(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  RunConfig cfg = config_arg(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.stage.empty()) {
    try {
      cfg.stage = parse_stage(o.stage);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.iterations) {
    if (*o.iterations < 0) throw UsageError("--iterations must be >= 0");
    cfg.iterations = *o.iterations;
  }
  std::optional<ActorCritic<float>> warm;
  if (!o.warm_start.empty()) {
    warm = checkpoint_arg(o.warm_start).net;
  } else if (cfg.stage == TrainingStage::Stage2) {
    std::cerr << "warning: stage2 without --warm-start, training from scratch\n";
  }
  const auto summary = run_training(cfg, o.workers, std::move(warm), &std::cerr);
  std::cout << "iterations " << summary.iterations_run << "\nslow_fraction "
            << summary.slow_fraction() << "\ncheckpoint " << summary.final_checkpoint.string()
            << "\nmetrics " << summary.metrics_csv.string() << '\n';
  return kExitOk;
}

RunConfig eval_config(const Options& o) {
  RunConfig cfg = config_arg(o.config);
  if (o.episodes) {
    if (*o.episodes < 1) throw UsageError("--episodes must be >= 1");
    cfg.eval.episodes = *o.episodes;
  }
  if (o.seed) cfg.eval.seed = *o.seed;
  if (o.spacing) cfg.eval.heatmap_spacing = *o.spacing;
  if (!o.yaw.empty()) cfg.eval.heatmap_yaw = o.yaw;
  if (o.fixed_yaw) cfg.eval.heatmap_fixed_yaw = *o.fixed_yaw;
  return cfg;
}

std::vector<int> levels_arg(const std::string& text, DifficultyMode mode) {
  std::vector<int> levels;
  try {
    levels = parse_levels(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (int l : levels) {
    if (l < 1 || l > level_count(mode)) {
      throw UsageError("level " + std::to_string(l) + " outside 1.." + std::to_string(level_count(mode)));
    }
  }
  return levels;
}

int cmd_eval(const Options& o) {
  const RunConfig cfg = eval_config(o);
  const DifficultyMode mode = mode_arg(o.mode);
  const auto levels = levels_arg(o.levels, mode);
  const auto ck = checkpoint_arg(o.checkpoint);
  const StairKind kind = kind_arg(o.terrain.empty() ? ck.meta.terrain_kind : o.terrain);
  TerrainSet terrains(cfg.ramp, cfg.limits, cfg.seed);
  terrains.add(kind, mode);
  std::vector<LevelResult> rows;
  for (int level : levels) {
    EvalOptions eo = cfg.eval_options(o.workers);
    if (o.trajectories > 0) {
      eo.trajectory_episodes = o.trajectories;
      eo.trajectory_dir = (o.out.empty() ? fs::path(".") : fs::path(o.out).parent_path()) / "trajectories";
    }
    rows.push_back(evaluate_level(ck.net, terrains, kind, mode, level, eo));
    std::cerr << to_string(kind) << " level " << level << ": " << rows.back().success_pct() << "%\n";
  }
  const fs::path out = o.out.empty() ? fs::path("eval_" + std::string(to_string(kind)) + ".csv") : fs::path(o.out);
  write_levels_csv(out, rows);
  std::cout << out.string() << '\n';
  return kExitOk;
}

int cmd_transfer(const Options& o) {
  const RunConfig cfg = eval_config(o);
  const auto levels = levels_arg(o.levels, DifficultyMode::Test);
  if (levels.size() != 2) throw UsageError("--levels must name exactly two test levels");
  std::vector<StairKind> kinds;
  for (const auto& t : split_list(o.terrains)) kinds.push_back(kind_arg(t));
  std::vector<NamedModel> models;
  bool missing = false;
  for (const auto& path : split_list(o.models)) {
    NamedModel m;
    m.name = model_name(path);
    if (fs::is_regular_file(path)) {
      auto ck = load_checkpoint(path);
      m.trained_on = kind_arg(ck.meta.terrain_kind);
      m.net = std::move(ck.net);
    } else {
      std::cerr << "missing checkpoint " << path << '\n';
      missing = true;
    }
    models.push_back(std::move(m));
  }
  TerrainSet terrains(cfg.ramp, cfg.limits, cfg.seed);
  for (auto k : kinds) terrains.add(k, DifficultyMode::Test);
  const auto rows = cross_matrix(models, kinds, terrains, cfg.eval_options(o.workers), levels[0], levels[1]);
  const fs::path out = fs::path(o.out.empty() ? "." : o.out) / "transfer_matrix.csv";
  write_transfer_csv(out, rows);
  std::cout << out.string() << '\n';
  return missing ? kExitRuntime : kExitOk;
}

int cmd_heatmap(const Options& o) {
  const RunConfig cfg = eval_config(o);
  if (cfg.eval.heatmap_yaw != "face_goal" && cfg.eval.heatmap_yaw != "fixed") {
    throw UsageError("--yaw must be face_goal or fixed");
  }
  if (!(cfg.eval.heatmap_spacing > 0.0)) throw UsageError("--spacing must be > 0");
  const DifficultyMode mode = mode_arg(o.mode);
  const int level = o.level == 0 ? 3 : o.level;
  if (level < 1 || level > level_count(mode)) throw UsageError("--level out of range");
  const StairKind kind = kind_arg(o.terrain);
  const auto ck = checkpoint_arg(o.checkpoint);
  const HeightField hf = generate(difficulty_to_spec(kind, level, mode, cfg.ramp), cfg.seed, cfg.limits);
  const auto hopt = heatmap_options(cfg, o.workers);
  const Heatmap map = critic_heatmap(ck.net, hf, cfg.env, hopt);
  const auto files = write_heatmap(map, hf, o.out.empty() ? fs::path(".") : fs::path(o.out),
                                   std::string(to_string(kind)), hopt);
  const double goal_mean = mean_over(map, goal_adjacent_cells(map, hf, cfg.env.goal_radius));
  const double wall_mean = mean_over(map, wall_adjacent_cells(map, hf, cfg.eval.wall_adjacent_radius));
  std::cout << files.csv.string() << '\n' << files.pgm.string() << '\n' << files.json.string()
            << "\ngoal_adjacent_mean " << goal_mean << "\nwall_adjacent_mean " << wall_mean << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stair-climbing navigation policy: terrain, training, evaluation"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--workers", o.workers, "Worker threads (results do not depend on this)")
        ->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("gen-terrain", "Generate a stair heightfield (CSV, PGM, manifest)");
  add_common(gen);
  gen->add_option("--kind", o.kind, "pyramid|straight|l_shaped|u_shaped|spiral")->required();
  gen->add_option("--level", o.level, "Difficulty level")->required();
  gen->add_option("--mode", o.mode, "train (10 levels) or test (6 levels)");
  gen->add_option("--seed", o.seed, "Terrain seed (default: config seed)");
  gen->add_option("--out", o.out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train a policy with PPO");
  add_common(train);
  train->add_option("--stage", o.stage, "stage1|stage2 (overrides config)");
  train->add_option("--warm-start", o.warm_start, "Checkpoint manifest to initialize from");
  train->add_option("--seed", o.seed, "Seed (overrides config and STAIRCLIMB_SEED)");
  train->add_option("--out", o.out, "Output directory (overrides config)");
  train->add_option("--iterations", o.iterations, "Iteration budget (overrides config)");

  auto* eval = app.add_subcommand("eval", "Success rate per difficulty level");
  add_common(eval);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint manifest")->required();
  eval->add_option("--terrain", o.terrain, "Terrain kind (default: the checkpoint's)");
  eval->add_option("--mode", o.mode, "train|test")->default_str("test");
  eval->add_option("--levels", o.levels, "Levels, e.g. 1..6 or 3,4");
  eval->add_option("--episodes", o.episodes, "Episodes per level");
  eval->add_option("--seed", o.seed, "Evaluation seed");
  eval->add_option("--out", o.out, "Output CSV path");
  eval->add_option("--trajectories", o.trajectories, "Dump this many episodes per level");

  auto* transfer = app.add_subcommand("transfer", "Cross-terrain transfer matrix");
  add_common(transfer);
  transfer->add_option("--models", o.models, "Comma-separated checkpoint manifests")->required();
  transfer->add_option("--terrains", o.terrains, "Comma-separated terrain kinds")->required();
  transfer->add_option("--levels", o.levels, "Two test levels")->default_str("3,4");
  transfer->add_option("--episodes", o.episodes, "Episodes per level");
  transfer->add_option("--seed", o.seed, "Evaluation seed");
  transfer->add_option("--out", o.out, "Output directory");

  auto* heat = app.add_subcommand("heatmap", "Critic value over the terrain plane");
  add_common(heat);
  heat->add_option("--checkpoint", o.checkpoint, "Checkpoint manifest")->required();
  heat->add_option("--terrain", o.terrain, "Terrain kind")->required();
  heat->add_option("--level", o.level, "Difficulty level (default 3)");
  heat->add_option("--mode", o.mode, "train|test")->default_str("test");
  heat->add_option("--spacing", o.spacing, "Lattice spacing in meters");
  heat->add_option("--yaw", o.yaw, "face_goal|fixed");
  heat->add_option("--fixed-yaw", o.fixed_yaw, "Yaw for --yaw fixed (radians)");
  heat->add_option("--out", o.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  if (eval->parsed() || heat->parsed()) {
    if (o.mode == "train" && eval->count("--mode") == 0 && heat->count("--mode") == 0) o.mode = "test";
  }
  if (transfer->parsed() && transfer->count("--levels") == 0) o.levels = "3,4";

  try {
    if (gen->parsed()) return cmd_gen_terrain(o);
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (transfer->parsed()) return cmd_transfer(o);
    if (heat->parsed()) return cmd_heatmap(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
