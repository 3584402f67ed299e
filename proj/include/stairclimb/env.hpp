#pragma once

// Reduced-order legged surrogate. Actions are 12 joint-position targets in
// [-1, 1]; joints follow them through a first-order lag (for the
// regularization terms) while the mean of each block of four actions sets a
// body-frame velocity command. Motion over the heightfield is gated by a
// climb-feasibility rule so taller risers are harder to ascend.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "curriculum.hpp"
#include "parallel.hpp"
#include "rewards.hpp"
#include "rng.hpp"
#include "terrain.hpp"

namespace stairclimb {

inline constexpr int kNumJoints = 12;
inline constexpr int kProprioDim = 49;
inline constexpr int kObsDim = kProprioDim + kHeightmapCells;  // 490

using JointVector = std::array<double, kNumJoints>;

struct EnvConfig {
  double dt = 0.05;
  int timeout_steps = 400;
  double stand_height = 0.35;
  double v_max = 1.0;
  double v_lat_max = 0.4;
  double yaw_rate_max = 1.5;
  double joint_time_constant = 0.2;
  double kp = 20.0;
  double kd = 0.5;
  double climb_max = 0.22;
  double min_climb_speed = 0.2;
  double max_climb_heading = std::numbers::pi / 6;  // 30 deg
  double drop_max = 0.45;
  double wall_clearance = 0.5;
  double goal_radius = 0.5;
  double goal_yaw_tolerance = 0.5;
  double spawn_jitter_pos = 0.1;
  double spawn_jitter_yaw = 0.1;
  double heightmap_spacing = 0.10;
  // Probability that a permitted ascent ends in a fall:
  //   stumble_max * (dh / climb_max)^stumble_exponent * (0.5 + 0.5 * heading / max_climb_heading)
  double stumble_max = 0.3;
  double stumble_exponent = 6.0;
};

/// Nominal stance: joint targets are offsets from the default posture, so the
/// stance is the zero vector.
inline constexpr JointVector kNominalStance{};

/// Observation vector laid out as [v_b, omega_b, g_b, joints, joint_vel,
/// last_action, p_goal, heightmap].
struct Observation {
  static constexpr std::size_t kVb = 0, kOmega = 3, kGravity = 6, kJoints = 9, kJointVel = 21,
                               kLastAction = 33, kGoal = 45, kHeightmap = 49;

  std::array<float, kObsDim> values{};

  std::span<const float, 3> v_b() const { return std::span(values).subspan<kVb, 3>(); }
  std::span<const float, 3> omega_b() const { return std::span(values).subspan<kOmega, 3>(); }
  std::span<const float, 3> g_b() const { return std::span(values).subspan<kGravity, 3>(); }
  std::span<const float, 12> joints() const { return std::span(values).subspan<kJoints, 12>(); }
  std::span<const float, 12> joint_vel() const {
    return std::span(values).subspan<kJointVel, 12>();
  }
  std::span<const float, 12> last_action() const {
    return std::span(values).subspan<kLastAction, 12>();
  }
  std::span<const float, 4> p_goal() const { return std::span(values).subspan<kGoal, 4>(); }
  std::span<const float, kHeightmapCells> heightmap() const {
    return std::span(values).subspan<kHeightmap, kHeightmapCells>();
  }
};

struct AgentState {
  double x = 0.0, y = 0.0, z = 0.0;
  double yaw = 0.0;
  std::array<double, 3> v_body{};
  double yaw_rate = 0.0;
  JointVector joints = kNominalStance;
  JointVector joint_vel{};
  JointVector last_action{};
  int step_count = 0;
  StairKind terrain = StairKind::Straight;
  int level = 1;
};

struct VelocityCommand {
  double vx = 0.0;
  double vy = 0.0;
  double yaw_rate = 0.0;
};

inline double clamp_action(double a) { return std::clamp(a, -1.0, 1.0); }

inline VelocityCommand action_to_command(std::span<const double, kNumJoints> action,
                                         const EnvConfig& cfg = {}) {
  auto block_mean = [&](std::size_t first) {
    double s = 0.0;
    for (std::size_t j = first; j < first + 4; ++j) s += clamp_action(action[j]);
    return s / 4.0;
  };
  return {cfg.v_max * std::tanh(block_mean(0)), cfg.v_lat_max * std::tanh(block_mean(4)),
          cfg.yaw_rate_max * std::tanh(block_mean(8))};
}

struct JointUpdate {
  JointVector joints{};
  JointVector joint_vel{};
  JointVector torque{};
};

inline JointUpdate joint_dynamics(std::span<const double, kNumJoints> joints,
                                  std::span<const double, kNumJoints> joint_vel,
                                  std::span<const double, kNumJoints> action, double dt,
                                  const EnvConfig& cfg = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  (void)joint_vel;  // the lag model is memoryless in velocity
  JointUpdate u;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    const double err = action[j] - joints[j];
    u.joint_vel[j] = err / cfg.joint_time_constant;
    u.joints[j] = joints[j] + u.joint_vel[j] * dt;
    u.torque[j] = cfg.kp * err - cfg.kd * u.joint_vel[j];
  }
  return u;
}

struct Transition {
  double x = 0.0, y = 0.0, yaw = 0.0;
  bool blocked = false;
  bool fell = false;
  bool out_of_bounds = false;
  bool stumbled = false;
  double climb = 0.0;  // height gained this step
};

/// Moves the base over the terrain. `stumble_rng` may be null, which turns
/// off the stochastic stumble on permitted ascents.
inline Transition terrain_transition(const AgentState& state, const VelocityCommand& cmd,
                                     const HeightField& hf, double dt, const EnvConfig& cfg,
                                     Rng* stumble_rng = nullptr) {
  Transition t;
  t.x = state.x;
  t.y = state.y;
  t.yaw = state.yaw + cmd.yaw_rate * dt;
  const double c = std::cos(state.yaw), s = std::sin(state.yaw);
  const double nx = state.x + (c * cmd.vx - s * cmd.vy) * dt;
  const double ny = state.y + (s * cmd.vx + c * cmd.vy) * dt;
  const double h0 = sample_height(hf, state.x, state.y);
  if (!hf.contains(nx, ny)) {
    t.x = nx;
    t.y = ny;
    t.fell = true;
    t.out_of_bounds = true;
    return t;
  }
  const double h1 = sample_height(hf, nx, ny);
  const double dh = h1 - h0;
  const double base_z = h0 + cfg.stand_height;
  if (h1 - base_z > cfg.wall_clearance) {
    t.blocked = true;
    return t;
  }
  if (dh > 0.0) {
    const double speed = std::hypot(cmd.vx, cmd.vy);
    Vec2 ascent = ascent_direction(hf, nx, ny) + ascent_direction(hf, state.x, state.y);
    if (norm(ascent) < 1e-12) ascent = {nx - state.x, ny - state.y};
    const double heading_offset =
        std::acos(std::clamp(dot(Vec2{c, s}, ascent) / norm(ascent), -1.0, 1.0));
    if (dh > cfg.climb_max || speed < cfg.min_climb_speed ||
        heading_offset > cfg.max_climb_heading) {
      t.blocked = true;
      return t;
    }
    if (stumble_rng != nullptr && cfg.stumble_max > 0.0) {
      const double p = cfg.stumble_max * std::pow(dh / cfg.climb_max, cfg.stumble_exponent) *
                       (0.5 + 0.5 * heading_offset / cfg.max_climb_heading);
      if (uniform(*stumble_rng, 0.0, 1.0) < p) t.stumbled = true;
    }
    t.climb = dh;
  }
  t.x = nx;
  t.y = ny;
  if (dh < -cfg.drop_max || t.stumbled) t.fell = true;
  return t;
}

/// Generated heightfields keyed by (kind, mode, level), shared read-only.
class TerrainSet {
 public:
  explicit TerrainSet(DifficultyRamp ramp = {}, GeneratorLimits limits = {},
                      std::uint64_t seed = 0)
      : ramp_(ramp), limits_(limits), seed_(seed) {}

  /// Generates every level of `kind` in `mode`.
  void add(StairKind kind, DifficultyMode mode) {
    for (int level = 1; level <= level_count(mode); ++level) {
      const auto key = std::make_tuple(kind, mode, level);
      if (fields_.contains(key)) continue;
      fields_.emplace(key, std::make_shared<const HeightField>(
                               generate(difficulty_to_spec(kind, level, mode, ramp_), seed_,
                                        limits_)));
    }
  }

  bool contains(StairKind kind, DifficultyMode mode, int level) const {
    return fields_.contains(std::make_tuple(kind, mode, level));
  }

  const HeightField& get(StairKind kind, DifficultyMode mode, int level) const {
    const auto it = fields_.find(std::make_tuple(kind, mode, level));
    if (it == fields_.end()) {
      throw std::out_of_range("no terrain " + std::string(to_string(kind)) + "/" +
                              std::string(to_string(mode)) + "/level " + std::to_string(level));
    }
    return *it->second;
  }

  const DifficultyRamp& ramp() const { return ramp_; }

 private:
  DifficultyRamp ramp_;
  GeneratorLimits limits_;
  std::uint64_t seed_;
  std::map<std::tuple<StairKind, DifficultyMode, int>, std::shared_ptr<const HeightField>>
      fields_;
};

/// Goal pose relative to a base at (x, y, z, yaw): planar offset in the body
/// frame, height of the goal base above this base, and yaw error.
inline std::array<double, 4> goal_in_body_frame(const HeightField& hf, double x, double y,
                                                double z, double yaw, double stand_height) {
  const double gx = hf.goal.x - x, gy = hf.goal.y - y;
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * gx + s * gy, -s * gx + c * gy, hf.goal.z + stand_height - z,
          wrap_angle(hf.goal.yaw - yaw)};
}

/// Policy input for a base state on a terrain. Gravity is fixed at (0, 0, -1)
/// and roll/pitch rates at zero in the planar surrogate.
inline Observation make_observation(const HeightField& hf, const AgentState& st,
                                    const EnvConfig& cfg) {
  Observation o;
  auto& v = o.values;
  for (std::size_t i = 0; i < 3; ++i) v[Observation::kVb + i] = static_cast<float>(st.v_body[i]);
  v[Observation::kOmega + 2] = static_cast<float>(st.yaw_rate);
  v[Observation::kGravity + 2] = -1.0f;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    v[Observation::kJoints + j] = static_cast<float>(st.joints[j]);
    v[Observation::kJointVel + j] = static_cast<float>(st.joint_vel[j]);
    v[Observation::kLastAction + j] = static_cast<float>(st.last_action[j]);
  }
  const auto goal = goal_in_body_frame(hf, st.x, st.y, st.z, st.yaw, cfg.stand_height);
  for (std::size_t i = 0; i < 4; ++i) v[Observation::kGoal + i] = static_cast<float>(goal[i]);
  const auto hm = local_heightmap(hf, st.x, st.y, st.z, st.yaw, cfg.heightmap_spacing);
  for (std::size_t i = 0; i < hm.size(); ++i) {
    v[Observation::kHeightmap + i] = static_cast<float>(hm[i]);
  }
  return o;
}

struct StepResult {
  RewardTerms reward;
  StepEvent event = StepEvent::Running;
  double speed = 0.0;
  bool in_goal_region = false;
};

class StairEnv {
 public:
  StairEnv(const TerrainSet& terrains, EnvConfig env_cfg, RewardConfig reward_cfg,
           DifficultyMode mode = DifficultyMode::Train, int env_id = 0)
      : terrains_(&terrains),
        cfg_(env_cfg),
        reward_cfg_(reward_cfg),
        mode_(mode),
        env_id_(env_id) {}

  Observation reset(StairKind terrain, int level, std::uint64_t seed) {
    hf_ = &terrains_->get(terrain, mode_, level);
    rng_ = make_stream(seed, kEnvStream, static_cast<std::uint64_t>(env_id_));
    state_ = AgentState{};
    state_.terrain = terrain;
    state_.level = level;
    state_.x = hf_->spawn.x + uniform(rng_, -cfg_.spawn_jitter_pos, cfg_.spawn_jitter_pos);
    state_.y = hf_->spawn.y + uniform(rng_, -cfg_.spawn_jitter_pos, cfg_.spawn_jitter_pos);
    state_.yaw = hf_->spawn.yaw + uniform(rng_, -cfg_.spawn_jitter_yaw, cfg_.spawn_jitter_yaw);
    state_.z = sample_height(*hf_, state_.x, state_.y) + cfg_.stand_height;
    d_far_ = std::hypot(hf_->goal.x - state_.x, hf_->goal.y - state_.y);
    progress_ = centerline_progress(*hf_, state_.x, state_.y).arclength;
    return observe();
  }

  StepResult step(std::span<const double, kNumJoints> raw_action) {
    if (hf_ == nullptr) throw std::logic_error("step before reset");
    JointVector a;
    for (std::size_t j = 0; j < kNumJoints; ++j) a[j] = clamp_action(raw_action[j]);

    const JointUpdate ju = joint_dynamics(state_.joints, state_.joint_vel, a, cfg_.dt, cfg_);
    JointVector joint_acc;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      joint_acc[j] = (ju.joint_vel[j] - state_.joint_vel[j]) / cfg_.dt;
    }
    const VelocityCommand cmd = action_to_command(a, cfg_);
    const Transition tr = terrain_transition(state_, cmd, *hf_, cfg_.dt, cfg_, &rng_);

    const double c = std::cos(state_.yaw), s = std::sin(state_.yaw);
    const double dx = tr.x - state_.x, dy = tr.y - state_.y;
    const double new_z = tr.fell ? state_.z : sample_height(*hf_, tr.x, tr.y) + cfg_.stand_height;
    state_.v_body = {(c * dx + s * dy) / cfg_.dt, (-s * dx + c * dy) / cfg_.dt,
                     (new_z - state_.z) / cfg_.dt};
    state_.yaw_rate = cmd.yaw_rate;
    state_.x = tr.x;
    state_.y = tr.y;
    state_.z = new_z;
    state_.yaw = wrap_angle(tr.yaw);
    ++state_.step_count;

    StepResult out;
    out.speed = std::hypot(dx, dy) / cfg_.dt;
    const double goal_dist = std::hypot(hf_->goal.x - state_.x, hf_->goal.y - state_.y);
    const double yaw_err = wrap_angle(hf_->goal.yaw - state_.yaw);
    out.in_goal_region = goal_dist <= cfg_.goal_radius;

    if (tr.out_of_bounds) {
      out.event = StepEvent::OutOfBounds;
    } else if (tr.fell) {
      out.event = StepEvent::Fell;
    } else if (out.in_goal_region && std::abs(yaw_err) <= cfg_.goal_yaw_tolerance) {
      out.event = StepEvent::GoalReached;
    } else if (state_.step_count >= cfg_.timeout_steps) {
      out.event = StepEvent::Timeout;
    }

    RawRewardTerms raw;
    if (reward_cfg_.stage == TrainingStage::Stage1) {
      raw.nav = nav_rewards(goal_dist, d_far_, reward_cfg_.sigma_near);
    } else {
      const auto proj = centerline_progress(*hf_, state_.x, state_.y);
      raw.stage2 = stage2_task(proj.arclength - progress_, proj.lateral_offset,
                               hf_->spec.stair_width / 4.0, reward_cfg_.path_clip);
      progress_ = proj.arclength;
    }
    raw.goal_reached = out.event == StepEvent::GoalReached;
    raw.reg = regularization(ju.torque, ju.joint_vel, joint_acc, a, state_.last_action,
                             ju.joints, reward_cfg_.joint_limit);
    raw.stall = stall_penalty(out.speed, out.in_goal_region, reward_cfg_);
    out.reward = total(raw, reward_cfg_);

    state_.joints = ju.joints;
    state_.joint_vel = ju.joint_vel;
    state_.last_action = a;
    last_torque_ = ju.torque;
    return out;
  }

  Observation observe() const {
    if (hf_ == nullptr) throw std::logic_error("observe before reset");
    return make_observation(*hf_, state_, cfg_);
  }

  const AgentState& state() const { return state_; }
  AgentState& mutable_state() { return state_; }
  const HeightField& terrain() const {
    if (hf_ == nullptr) throw std::logic_error("no terrain before reset");
    return *hf_;
  }
  const EnvConfig& config() const { return cfg_; }
  const JointVector& last_torque() const { return last_torque_; }
  DifficultyMode mode() const { return mode_; }

 private:
  static constexpr std::uint64_t kEnvStream = 0xE4B1ULL;

  const TerrainSet* terrains_;
  EnvConfig cfg_;
  RewardConfig reward_cfg_;
  DifficultyMode mode_;
  int env_id_;
  const HeightField* hf_ = nullptr;
  AgentState state_;
  Rng rng_;
  double d_far_ = 1.0;
  double progress_ = 0.0;
  JointVector last_torque_{};
};

/// N environments sharing one terrain kind, each with its own curriculum
/// slot. Terminal episodes reset in place, so the observation returned for a
/// finished env is the first one of its next episode.
class VecEnv {
 public:
  struct Options {
    StairKind kind = StairKind::Straight;
    DifficultyMode mode = DifficultyMode::Train;
    int num_envs = 1;
    int start_level = 1;
    bool curriculum = true;
    std::uint64_t seed = 0;
  };

  struct BatchStep {
    std::vector<StepResult> results;
    std::vector<int> levels_before;  // level each env was on during this step
  };

  VecEnv(const TerrainSet& terrains, EnvConfig env_cfg, RewardConfig reward_cfg, Options opt)
      : opt_(opt), curriculum_(opt.num_envs, opt.seed, opt.start_level, opt.curriculum) {
    if (opt.num_envs < 1) throw std::invalid_argument("need at least one env");
    envs_.reserve(static_cast<std::size_t>(opt.num_envs));
    episode_counter_.assign(static_cast<std::size_t>(opt.num_envs), 0);
    obs_.resize(static_cast<std::size_t>(opt.num_envs));
    for (int i = 0; i < opt.num_envs; ++i) {
      envs_.emplace_back(terrains, env_cfg, reward_cfg, opt.mode, i);
      obs_[i] = envs_.back().reset(opt.kind, curriculum_.level(i), episode_seed(i));
    }
  }

  int size() const { return static_cast<int>(envs_.size()); }
  const std::vector<Observation>& observations() const { return obs_; }
  const CurriculumState& curriculum() const { return curriculum_; }
  const StairEnv& env(int i) const { return envs_.at(static_cast<std::size_t>(i)); }

  /// `actions` is row-major num_envs x 12.
  BatchStep step(std::span<const double> actions, int workers = 1,
                 int chunk = kDefaultChunk) {
    if (actions.size() != envs_.size() * kNumJoints) {
      throw std::invalid_argument("action batch has " + std::to_string(actions.size() / kNumJoints) +
                                  " rows for " + std::to_string(envs_.size()) + " envs");
    }
    BatchStep out;
    out.results.resize(envs_.size());
    out.levels_before.resize(envs_.size());
    const int n = size();
    const int chunks = (n + chunk - 1) / chunk;
    parallel_for(chunks, workers, [&](int c) {
      for (int i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
        auto& env = envs_[static_cast<std::size_t>(i)];
        out.levels_before[i] = env.state().level;
        out.results[i] = env.step(actions.subspan(static_cast<std::size_t>(i) * kNumJoints)
                                      .first<kNumJoints>());
        if (!is_terminal(out.results[i].event)) obs_[i] = env.observe();
      }
    });
    // Curriculum bookkeeping stays serial so the histogram is updated in env order.
    for (int i = 0; i < n; ++i) {
      if (!is_terminal(out.results[i].event)) continue;
      const int next = curriculum_.on_episode_end(i, out.results[i].event);
      ++episode_counter_[i];
      obs_[i] = envs_[i].reset(opt_.kind, next, episode_seed(i));
    }
    return out;
  }

  static constexpr int kDefaultChunk = 64;

 private:
  std::uint64_t episode_seed(int env) const {
    return splitmix64(opt_.seed ^ splitmix64(static_cast<std::uint64_t>(env) << 32 |
                                             episode_counter_[static_cast<std::size_t>(env)]));
  }

  Options opt_;
  CurriculumState curriculum_;
  std::vector<StairEnv> envs_;
  std::vector<std::uint64_t> episode_counter_;
  std::vector<Observation> obs_;
};

}  // namespace stairclimb
