#pragma once

// Run configuration: JSON in, fully resolved JSON out. Every key of the input
// must exist in the defaults; missing keys take default values.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "env.hpp"
#include "eval.hpp"
#include "grid_io.hpp"
#include "json.hpp"
#include "ppo.hpp"
#include "rewards.hpp"
#include "terrain.hpp"

namespace stairclimb {

/// Raised for malformed or inconsistent configuration (exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PpoConfig, gamma, gae_lambda, clip, epochs, minibatches, lr,
                                   entropy_coef, value_coef, max_grad_norm, rollout_steps,
                                   num_envs, adv_eps)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EnvConfig, dt, timeout_steps, stand_height, v_max, v_lat_max,
                                   yaw_rate_max, joint_time_constant, kp, kd, climb_max,
                                   min_climb_speed, max_climb_heading, drop_max, wall_clearance,
                                   goal_radius, goal_yaw_tolerance, spawn_jitter_pos,
                                   spawn_jitter_yaw, heightmap_spacing, stumble_max,
                                   stumble_exponent)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RewardWeights, nav_far, nav_near, centering, path, goal_bonus,
                                   power, torque, action_rate, joint_limit, joint_vel, joint_acc,
                                   stall)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DifficultyRamp, train_riser_min, train_riser_max,
                                   train_tread_max, train_tread_min, test_riser_min,
                                   test_riser_max, test_tread_max, test_tread_min)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GeneratorLimits, max_cells_per_axis, margin, wall_thickness,
                                   apron_length, spawn_setback, cell_size)

struct CurriculumConfig {
  bool enabled = true;
  int start_level = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CurriculumConfig, enabled, start_level)

struct EvalConfig {
  int episodes = 300;
  std::uint64_t seed = 12345;
  double heatmap_spacing = 0.1;
  std::string heatmap_yaw = "face_goal";
  double heatmap_fixed_yaw = 0.0;
  double wall_adjacent_radius = 0.15;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EvalConfig, episodes, seed, heatmap_spacing, heatmap_yaw,
                                   heatmap_fixed_yaw, wall_adjacent_radius)

struct RunConfig {
  std::uint64_t seed = 1;
  TrainingStage stage = TrainingStage::Stage2;
  StairKind terrain_kind = StairKind::Straight;
  DifficultyMode terrain_mode = DifficultyMode::Train;
  int iterations = 1500;
  int checkpoint_every = 100;
  // Stop once the per-iteration success rate has stayed at or above this
  // value for `stop_patience` consecutive iterations; <= 0 disables.
  double stop_success_rate = 0.0;
  int stop_patience = 10;
  bool record_wall_time = false;
  std::string out_dir = "runs/default";
  PpoConfig ppo;
  EnvConfig env;
  RewardWeights reward_weights;
  bool stall_enabled = true;
  double stall_speed_threshold = 0.3;
  double stall_penalty_value = -1.0;
  double sigma_near = 0.5;
  double path_clip = 0.2;
  double joint_limit = 1.2;
  CurriculumConfig curriculum;
  DifficultyRamp ramp;
  GeneratorLimits limits;
  EvalConfig eval;

  RewardConfig reward_config() const {
    RewardConfig r;
    r.stage = stage;
    r.weights = reward_weights;
    r.stall_enabled = stall_enabled;
    r.stall_speed_threshold = stall_speed_threshold;
    r.stall_penalty_value = stall_penalty_value;
    r.sigma_near = sigma_near;
    r.path_clip = path_clip;
    r.joint_limit = joint_limit;
    return r;
  }

  TrainerOptions trainer_options(int workers) const {
    TrainerOptions o;
    o.ppo = ppo;
    o.env = env;
    o.rewards = reward_config();
    o.kind = terrain_kind;
    o.start_level = curriculum.start_level;
    o.curriculum = curriculum.enabled;
    o.seed = seed;
    o.workers = workers;
    return o;
  }

  EvalOptions eval_options(int workers) const {
    EvalOptions o;
    o.env = env;
    o.rewards = reward_config();
    o.episodes = eval.episodes;
    o.seed = eval.seed;
    o.workers = workers;
    return o;
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"seed", c.seed},
       {"stage", std::string(to_string(c.stage))},
       {"terrain_kind", std::string(to_string(c.terrain_kind))},
       {"terrain_mode", std::string(to_string(c.terrain_mode))},
       {"iterations", c.iterations},
       {"checkpoint_every", c.checkpoint_every},
       {"stop_success_rate", c.stop_success_rate},
       {"stop_patience", c.stop_patience},
       {"record_wall_time", c.record_wall_time},
       {"out_dir", c.out_dir},
       {"ppo", c.ppo},
       {"env", c.env},
       {"reward_weights", c.reward_weights},
       {"stall_enabled", c.stall_enabled},
       {"stall_speed_threshold", c.stall_speed_threshold},
       {"stall_penalty_value", c.stall_penalty_value},
       {"sigma_near", c.sigma_near},
       {"path_clip", c.path_clip},
       {"joint_limit", c.joint_limit},
       {"curriculum", c.curriculum},
       {"ramp", c.ramp},
       {"limits", c.limits},
       {"eval", c.eval}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  j.at("seed").get_to(c.seed);
  c.stage = parse_stage(j.at("stage").get<std::string>());
  c.terrain_kind = parse_stair_kind(j.at("terrain_kind").get<std::string>());
  c.terrain_mode = parse_difficulty_mode(j.at("terrain_mode").get<std::string>());
  j.at("iterations").get_to(c.iterations);
  j.at("checkpoint_every").get_to(c.checkpoint_every);
  j.at("stop_success_rate").get_to(c.stop_success_rate);
  j.at("stop_patience").get_to(c.stop_patience);
  j.at("record_wall_time").get_to(c.record_wall_time);
  j.at("out_dir").get_to(c.out_dir);
  j.at("ppo").get_to(c.ppo);
  j.at("env").get_to(c.env);
  j.at("reward_weights").get_to(c.reward_weights);
  j.at("stall_enabled").get_to(c.stall_enabled);
  j.at("stall_speed_threshold").get_to(c.stall_speed_threshold);
  j.at("stall_penalty_value").get_to(c.stall_penalty_value);
  j.at("sigma_near").get_to(c.sigma_near);
  j.at("path_clip").get_to(c.path_clip);
  j.at("joint_limit").get_to(c.joint_limit);
  j.at("curriculum").get_to(c.curriculum);
  j.at("ramp").get_to(c.ramp);
  j.at("limits").get_to(c.limits);
  j.at("eval").get_to(c.eval);
}

namespace detail {

inline void merge_strict(nlohmann::json& base, const nlohmann::json& over, const std::string& path) {
  if (!over.is_object()) throw ConfigError("config section '" + path + "' must be an object");
  for (const auto& [key, value] : over.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    auto& slot = base[key];
    if (slot.is_object()) {
      merge_strict(slot, value, where);
    } else {
      if (slot.is_number() != value.is_number() || slot.is_boolean() != value.is_boolean() ||
          slot.is_string() != value.is_string()) {
        throw ConfigError("config key '" + where + "' has the wrong type");
      }
      slot = value;
    }
  }
}

}  // namespace detail

/// Defaults overlaid with `user`; rejects unknown keys and invalid values.
inline RunConfig resolve_config(const nlohmann::json& user) {
  nlohmann::json merged = RunConfig{};
  detail::merge_strict(merged, user, "");
  RunConfig c;
  try {
    c = merged.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  try {
    c.ppo.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.iterations < 0) throw ConfigError("iterations must be >= 0");
  if (c.checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (c.curriculum.start_level < 1 || c.curriculum.start_level > kCurriculumLevels) {
    throw ConfigError("curriculum.start_level must be in 1..10");
  }
  if (c.eval.episodes < 1) throw ConfigError("eval.episodes must be >= 1");
  if (c.eval.heatmap_yaw != "face_goal" && c.eval.heatmap_yaw != "fixed") {
    throw ConfigError("eval.heatmap_yaw must be face_goal or fixed");
  }
  if (!(c.env.dt > 0.0)) throw ConfigError("env.dt must be > 0");
  return c;
}

/// Parses an unsigned seed string; nullopt when `text` is null.
inline std::optional<std::uint64_t> parse_seed(const char* text, const std::string& source) {
  if (text == nullptr) return std::nullopt;
  const std::string s(text);
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || s.front() == '-') {
    throw ConfigError(source + " must be a non-negative integer, got '" + s + "'");
  }
  return v;
}

/// Reads the config file (if any), then applies STAIRCLIMB_SEED.
inline RunConfig load_run_config(const std::optional<std::filesystem::path>& path) {
  nlohmann::json user = nlohmann::json::object();
  if (path) {
    if (!std::filesystem::is_regular_file(*path)) {
      throw ConfigError("cannot read config " + path->string());
    }
    try {
      user = read_json(*path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  RunConfig c = resolve_config(user);
  if (auto s = parse_seed(std::getenv("STAIRCLIMB_SEED"), "STAIRCLIMB_SEED")) c.seed = *s;
  return c;
}

}  // namespace stairclimb
