#pragma once

// Per-step reward: r_total = r_task + sum_i lambda_i * r_reg_i, with the stall
// penalty entering as one more weighted regularizer.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stairclimb {

enum class TrainingStage { Stage1, Stage2 };

inline std::string_view to_string(TrainingStage s) {
  return s == TrainingStage::Stage1 ? "stage1" : "stage2";
}

inline TrainingStage parse_stage(std::string_view name) {
  if (name == "stage1") return TrainingStage::Stage1;
  if (name == "stage2") return TrainingStage::Stage2;
  throw std::invalid_argument("unknown stage: " + std::string(name));
}

struct RewardWeights {
  double nav_far = 1.0;
  double nav_near = 1.5;
  double centering = 0.5;
  double path = 10.0;
  double goal_bonus = 10.0;
  double power = -2e-4;
  double torque = -1e-4;
  double action_rate = -0.01;
  double joint_limit = -1.0;
  double joint_vel = -1e-4;
  double joint_acc = -2.5e-7;
  double stall = 1.0;
};

struct RewardConfig {
  TrainingStage stage = TrainingStage::Stage2;
  RewardWeights weights;
  bool stall_enabled = true;
  double stall_speed_threshold = 0.3;  // m/s, strict: speed < threshold stalls
  double stall_penalty_value = -1.0;
  double sigma_near = 0.5;
  double path_clip = 0.2;
  double joint_limit = 1.2;  // rad
};

struct NavRewards {
  double far = 0.0;
  double near = 0.0;
};

inline NavRewards nav_rewards(double distance, double d_far, double sigma_near) {
  if (!(d_far > 0.0)) throw std::invalid_argument("nav reward range d_far must be > 0");
  if (distance < 0.0) throw std::invalid_argument("distance must be >= 0");
  return {1.0 - std::min(distance / d_far, 1.0),
          std::exp(-distance * distance / (sigma_near * sigma_near))};
}

struct Stage2Rewards {
  double path = 0.0;
  double center = 0.0;
};

inline Stage2Rewards stage2_task(double progress, double lateral_offset, double sigma_center,
                                 double path_clip = 0.2) {
  return {std::clamp(progress, -path_clip, path_clip),
          std::exp(-lateral_offset * lateral_offset / (sigma_center * sigma_center))};
}

inline double stall_penalty(double speed, bool in_goal_region, const RewardConfig& cfg) {
  if (speed < cfg.stall_speed_threshold && !in_goal_region) return cfg.stall_penalty_value;
  return 0.0;
}

/// Unweighted regularization magnitudes (all >= 0).
struct Regularization {
  double power = 0.0;
  double torque = 0.0;
  double action_rate = 0.0;
  double joint_limit = 0.0;
  double joint_vel = 0.0;
  double joint_acc = 0.0;
};

inline Regularization regularization(std::span<const double, 12> torque,
                                     std::span<const double, 12> joint_vel,
                                     std::span<const double, 12> joint_acc,
                                     std::span<const double, 12> action,
                                     std::span<const double, 12> last_action,
                                     std::span<const double, 12> joints, double joint_limit) {
  Regularization r;
  for (std::size_t j = 0; j < 12; ++j) {
    r.power += std::abs(torque[j] * joint_vel[j]);
    r.torque += torque[j] * torque[j];
    const double da = action[j] - last_action[j];
    r.action_rate += da * da;
    const double excess = std::max(0.0, std::abs(joints[j]) - joint_limit);
    r.joint_limit += excess * excess;
    r.joint_vel += joint_vel[j] * joint_vel[j];
    r.joint_acc += joint_acc[j] * joint_acc[j];
  }
  return r;
}

/// Raw inputs to the composition. Exactly one of `nav` / `stage2` must be
/// present, matching the configured stage.
struct RawRewardTerms {
  std::optional<NavRewards> nav;
  std::optional<Stage2Rewards> stage2;
  bool goal_reached = false;
  Regularization reg;
  double stall = 0.0;  // output of stall_penalty (already negative)
};

/// Weighted contributions; `total` is their exact sum.
struct RewardTerms {
  double nav_far = 0.0;
  double nav_near = 0.0;
  double path = 0.0;
  double center = 0.0;
  double goal = 0.0;
  double power = 0.0;
  double torque = 0.0;
  double action_rate = 0.0;
  double joint_limit = 0.0;
  double joint_vel = 0.0;
  double joint_acc = 0.0;
  double stall = 0.0;
  double task = 0.0;
  double total = 0.0;

  static constexpr std::array<std::string_view, 12> kNames = {
      "nav_far", "nav_near", "path", "center", "goal", "power",
      "torque", "action_rate", "joint_limit", "joint_vel", "joint_acc", "stall"};

  std::array<double, 12> values() const {
    return {nav_far, nav_near, path, center, goal, power,
            torque, action_rate, joint_limit, joint_vel, joint_acc, stall};
  }
};

inline RewardTerms total(const RawRewardTerms& raw, const RewardConfig& cfg) {
  const auto& w = cfg.weights;
  RewardTerms t;
  if (cfg.stage == TrainingStage::Stage1) {
    if (!raw.nav || raw.stage2) throw std::invalid_argument("stage1 expects navigation terms only");
    t.nav_far = w.nav_far * raw.nav->far;
    t.nav_near = w.nav_near * raw.nav->near;
  } else {
    if (!raw.stage2 || raw.nav) throw std::invalid_argument("stage2 expects path/centering terms only");
    t.path = w.path * raw.stage2->path;
    t.center = w.centering * raw.stage2->center;
  }
  t.goal = raw.goal_reached ? w.goal_bonus : 0.0;
  t.task = t.nav_far + t.nav_near + t.path + t.center + t.goal;
  t.power = w.power * raw.reg.power;
  t.torque = w.torque * raw.reg.torque;
  t.action_rate = w.action_rate * raw.reg.action_rate;
  t.joint_limit = w.joint_limit * raw.reg.joint_limit;
  t.joint_vel = w.joint_vel * raw.reg.joint_vel;
  t.joint_acc = w.joint_acc * raw.reg.joint_acc;
  t.stall = cfg.stall_enabled ? w.stall * raw.stall : 0.0;
  t.total = t.task + t.power + t.torque + t.action_rate + t.joint_limit + t.joint_vel +
            t.joint_acc + t.stall;
  return t;
}

}  // namespace stairclimb
