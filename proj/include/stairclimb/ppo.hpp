#pragma once

// Proximal policy optimization over a VecEnv: rollouts, GAE, clipped
// surrogate updates. Every reduction runs over fixed-size chunks in a fixed
// order, so results do not depend on the worker count.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adam.hpp"
#include "checkpoint.hpp"
#include "env.hpp"
#include "net.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace stairclimb {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 5;
  int minibatches = 4;
  double lr = 3e-4;
  double entropy_coef = 0.005;
  double value_coef = 0.5;
  double max_grad_norm = 1.0;
  int rollout_steps = 48;
  int num_envs = 256;
  double adv_eps = 1e-8;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
      throw std::invalid_argument("gae_lambda must be in [0, 1]");
    }
    if (!(clip > 0.0)) throw std::invalid_argument("clip must be > 0");
    if (epochs < 1 || minibatches < 1 || rollout_steps < 1 || num_envs < 1) {
      throw std::invalid_argument("epochs, minibatches, rollout_steps and num_envs must be >= 1");
    }
    if ((static_cast<long>(rollout_steps) * num_envs) % minibatches != 0) {
      throw std::invalid_argument("rollout_steps * num_envs must divide into minibatches");
    }
  }
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t,
/// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, with V_T = bootstrap.
inline GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                             std::span<const std::uint8_t> dones, double bootstrap_value,
                             double gamma, double lambda) {
  const std::size_t T = rewards.size();
  if (values.size() != T || dones.size() != T) {
    throw std::invalid_argument("compute_gae: rewards, values and dones must have equal length");
  }
  GaeResult out{std::vector<double>(T), std::vector<double>(T)};
  double next_value = bootstrap_value, next_adv = 0.0;
  for (std::size_t k = T; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
    next_value = values[k];
  }
  return out;
}

/// Zero mean, unit (population) standard deviation.
inline void normalize_advantages(std::span<double> adv, double eps = 1e-8) {
  if (adv.empty()) return;
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(adv.size()));
  for (double& a : adv) a = (a - mean) / (sd + eps);
}

struct PpoLossTerms {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

/// One minibatch of training rows.
template <typename S>
struct Minibatch {
  using Mat = typename ActorCritic<S>::Mat;
  Mat obs;      // M x 490
  Mat actions;  // M x 12
  std::vector<double> logp_old, advantages, returns;
  int size() const { return static_cast<int>(obs.rows()); }
};

inline constexpr int kTrainChunk = 256;
inline constexpr int kInferenceChunk = 64;

/// Clipped-surrogate loss on a minibatch (advantages already normalized).
/// When `grad` is non-empty it receives d(total)/d(params) (overwritten).
template <typename S>
PpoLossTerms ppo_loss(const ActorCritic<S>& net, const Minibatch<S>& mb, const PpoConfig& cfg,
                      std::span<S> grad = {}, int workers = 1) {
  using Mat = typename ActorCritic<S>::Mat;
  const int M = mb.size();
  if (M == 0) throw std::invalid_argument("empty minibatch");
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != net.params().size()) {
    throw std::invalid_argument("gradient buffer size mismatch");
  }
  const int chunks = (M + kTrainChunk - 1) / kTrainChunk;
  const auto std_dev = net.action_std();
  const auto log_std = net.block("actor.log_std");
  const double inv_m = 1.0 / M;

  struct ChunkOut {
    double policy = 0.0, value = 0.0, clipped = 0.0, kl = 0.0;
    std::vector<S> grad;
    std::array<double, kActionDim> d_log_std{};
  };
  std::vector<ChunkOut> outs(static_cast<std::size_t>(chunks));
  parallel_for(chunks, workers, [&](int c) {
    const int r0 = c * kTrainChunk;
    const int rows = std::min(kTrainChunk, M - r0);
    ChunkOut& o = outs[static_cast<std::size_t>(c)];
    ForwardTrace<S> trace;
    net.forward(mb.obs.middleRows(r0, rows), trace);
    Mat d_mean = Mat::Zero(rows, kActionDim);
    Mat d_value(rows, 1);
    for (int r = 0; r < rows; ++r) {
      const int i = r0 + r;
      double logp = 0.0;
      std::array<double, kActionDim> z{};
      for (int j = 0; j < kActionDim; ++j) {
        z[j] = (static_cast<double>(mb.actions(i, j)) - trace.mean(r, j)) / std_dev[j];
        logp += -0.5 * z[j] * z[j] - static_cast<double>(log_std[j]) - kHalfLog2Pi;
      }
      const double log_ratio = logp - mb.logp_old[i];
      const double ratio = std::exp(log_ratio);
      const double adv = mb.advantages[i];
      const double surr1 = ratio * adv;
      const double surr2 = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
      o.policy -= std::min(surr1, surr2);
      if (std::abs(ratio - 1.0) > cfg.clip) o.clipped += 1.0;
      o.kl += (ratio - 1.0) - log_ratio;
      const double v_err = trace.value(r, 0) - mb.returns[i];
      o.value += v_err * v_err;
      d_value(r, 0) = static_cast<S>(cfg.value_coef * 2.0 * v_err * inv_m);
      // d(-min(surr1, surr2))/d logp is -ratio * A on the unclipped branch, else 0.
      const double d_logp = surr1 <= surr2 ? -surr1 * inv_m : 0.0;
      if (d_logp != 0.0) {
        for (int j = 0; j < kActionDim; ++j) {
          d_mean(r, j) = static_cast<S>(d_logp * z[j] / std_dev[j]);
          o.d_log_std[j] += d_logp * (z[j] * z[j] - 1.0);
        }
      }
    }
    if (want_grad) {
      o.grad.assign(grad.size(), S(0));
      net.backward(trace, d_mean, d_value, o.grad);
    }
  });

  PpoLossTerms terms;
  std::array<double, kActionDim> d_log_std{};
  if (want_grad) std::fill(grad.begin(), grad.end(), S(0));
  for (const auto& o : outs) {
    terms.policy_loss += o.policy;
    terms.value_loss += o.value;
    terms.clip_fraction += o.clipped;
    terms.approx_kl += o.kl;
    if (want_grad) {
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += o.grad[k];
      for (int j = 0; j < kActionDim; ++j) d_log_std[j] += o.d_log_std[j];
    }
  }
  terms.policy_loss *= inv_m;
  terms.value_loss *= inv_m;
  terms.clip_fraction *= inv_m;
  terms.approx_kl *= inv_m;
  for (int j = 0; j < kActionDim; ++j) {
    terms.entropy += 0.5 + kHalfLog2Pi + static_cast<double>(log_std[j]);
  }
  terms.total = terms.policy_loss + cfg.value_coef * terms.value_loss -
                cfg.entropy_coef * terms.entropy;
  if (!std::isfinite(terms.total)) {
    std::ostringstream msg;
    msg << "non-finite PPO loss (policy " << terms.policy_loss << ", value " << terms.value_loss
        << ", entropy " << terms.entropy << ")";
    throw std::runtime_error(msg.str());
  }
  if (want_grad) {
    const auto& b = find_block("actor.log_std");
    for (int j = 0; j < kActionDim; ++j) {
      grad[b.offset + j] += static_cast<S>(d_log_std[j] - cfg.entropy_coef);
    }
  }
  return terms;
}

/// Rescales `grad` so its L2 norm is at most max_norm; returns the original norm.
template <typename S>
double clip_grad_norm(std::span<S> grad, double max_norm) {
  double sq = 0.0;
  for (S g : grad) sq += static_cast<double>(g) * g;
  const double n = std::sqrt(sq);
  if (max_norm > 0.0 && n > max_norm) {
    const double s = max_norm / (n + 1e-12);
    for (S& g : grad) g = static_cast<S>(g * s);
  }
  return n;
}

/// Per (env, step) rollout storage, env-major: row = env * T + t.
struct RolloutBatch {
  int num_envs = 0;
  int steps = 0;
  ActorCritic<float>::Mat obs;
  ActorCritic<float>::Mat actions;
  std::vector<double> logp_old, rewards, values;
  std::vector<std::uint8_t> dones;
  std::vector<StepEvent> events;
  std::vector<double> bootstrap;  // per env, critic value after the last step

  void resize(int n, int t) {
    num_envs = n;
    steps = t;
    const auto rows = static_cast<Eigen::Index>(n) * t;
    obs.resize(rows, kObsDim);
    actions.resize(rows, kActionDim);
    logp_old.assign(rows, 0.0);
    rewards.assign(rows, 0.0);
    values.assign(rows, 0.0);
    dones.assign(rows, 0);
    events.assign(rows, StepEvent::Running);
    bootstrap.assign(static_cast<std::size_t>(n), 0.0);
  }
  std::size_t row(int env, int t) const {
    return static_cast<std::size_t>(env) * steps + static_cast<std::size_t>(t);
  }
};

/// Batched policy inference in fixed-size zero-padded chunks so each row's
/// result is independent of batch composition.
inline void infer(const ActorCritic<float>& net, const ActorCritic<float>::Mat& obs,
                  ActorCritic<float>::Mat& mean, std::vector<double>& value, int workers) {
  using Mat = ActorCritic<float>::Mat;
  const int n = static_cast<int>(obs.rows());
  mean.resize(n, kActionDim);
  value.assign(static_cast<std::size_t>(n), 0.0);
  const int chunks = (n + kInferenceChunk - 1) / kInferenceChunk;
  parallel_for(chunks, workers, [&](int c) {
    const int r0 = c * kInferenceChunk;
    const int rows = std::min(kInferenceChunk, n - r0);
    Mat x = Mat::Zero(kInferenceChunk, kObsDim);
    x.topRows(rows) = obs.middleRows(r0, rows);
    ForwardTrace<float> t;
    net.forward(x, t);
    mean.middleRows(r0, rows) = t.mean.topRows(rows);
    for (int r = 0; r < rows; ++r) value[static_cast<std::size_t>(r0 + r)] = t.value(r, 0);
  });
}

struct IterationStats {
  int iteration = 0;
  double wall_ms = 0.0;
  int episodes = 0;
  double mean_return = std::numeric_limits<double>::quiet_NaN();
  double success_rate = std::numeric_limits<double>::quiet_NaN();
  double mean_level = 0.0;
  PpoLossTerms loss;
  double slow_fraction = 0.0;
  long slow_steps = 0;
  long steps = 0;
  std::array<double, 12> reward_terms{};  // per-step means of weighted terms
  std::array<int, kCurriculumLevels> level_histogram{};
};

struct TrainerOptions {
  PpoConfig ppo;
  EnvConfig env;
  RewardConfig rewards;
  StairKind kind = StairKind::Straight;
  int start_level = 1;
  bool curriculum = true;
  std::uint64_t seed = 1;
  int workers = 1;
};

class PpoTrainer {
 public:
  using Mat = ActorCritic<float>::Mat;

  PpoTrainer(const TerrainSet& terrains, TrainerOptions opt,
             std::optional<ActorCritic<float>> warm_start = std::nullopt)
      : opt_(opt),
        net_(warm_start ? std::move(*warm_start) : ActorCritic<float>(opt.seed)),
        adam_(parameter_count(), AdamConfig{opt.ppo.lr}),
        envs_(terrains, opt.env, opt.rewards,
              VecEnv::Options{opt.kind, DifficultyMode::Train, opt.ppo.num_envs, opt.start_level,
                              opt.curriculum, opt.seed}),
        shuffle_rng_(make_stream(opt.seed, kShuffleStream, 0)),
        episode_return_(static_cast<std::size_t>(opt.ppo.num_envs), 0.0) {
    opt_.ppo.validate();
    for (int i = 0; i < opt.ppo.num_envs; ++i) {
      action_rngs_.push_back(make_stream(opt.seed, kActionStream, static_cast<std::uint64_t>(i)));
    }
  }

  const ActorCritic<float>& net() const { return net_; }
  ActorCritic<float>& net() { return net_; }
  const VecEnv& envs() const { return envs_; }
  int iteration() const { return iteration_; }

  IterationStats run_iteration() {
    const auto t0 = std::chrono::steady_clock::now();
    IterationStats stats;
    collect(stats);
    update(stats);
    stats.iteration = iteration_++;
    stats.mean_level = envs_.curriculum().mean_level();
    stats.level_histogram = envs_.curriculum().level_histogram();
    stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return stats;
  }

 private:
  static constexpr std::uint64_t kShuffleStream = 0x5A0FULL;
  static constexpr std::uint64_t kActionStream = 0xAC7ULL;

  void collect(IterationStats& stats) {
    const int N = opt_.ppo.num_envs, T = opt_.ppo.rollout_steps;
    batch_.resize(N, T);
    Mat obs(N, kObsDim), mean;
    std::vector<double> value;
    std::vector<double> actions(static_cast<std::size_t>(N) * kActionDim);
    const auto std_dev = net_.action_std();
    const auto log_std = net_.block("actor.log_std");
    double returns_sum = 0.0;
    int successes = 0;
    std::array<double, 12> term_sums{};

    for (int t = 0; t < T; ++t) {
      const auto& cur = envs_.observations();
      for (int i = 0; i < N; ++i) {
        obs.row(i) = Eigen::Map<const Eigen::RowVectorXf>(cur[i].values.data(), kObsDim);
      }
      infer(net_, obs, mean, value, opt_.workers);
      for (int i = 0; i < N; ++i) {
        const std::size_t r = batch_.row(i, t);
        std::normal_distribution<double> normal(0.0, 1.0);
        double logp = 0.0;
        for (int j = 0; j < kActionDim; ++j) {
          const double eps = normal(action_rngs_[i]);
          const float a = static_cast<float>(mean(i, j) + std_dev[j] * eps);
          batch_.actions(r, j) = a;
          actions[static_cast<std::size_t>(i) * kActionDim + j] = a;
          const double z = (static_cast<double>(a) - mean(i, j)) / std_dev[j];
          logp += -0.5 * z * z - static_cast<double>(log_std[j]) - kHalfLog2Pi;
        }
        batch_.obs.row(r) = obs.row(i);
        batch_.logp_old[r] = logp;
        batch_.values[r] = value[i];
      }
      const auto step = envs_.step(actions, opt_.workers);
      for (int i = 0; i < N; ++i) {
        const std::size_t r = batch_.row(i, t);
        const auto& res = step.results[i];
        double reward = res.reward.total;
        if (res.event == StepEvent::Timeout) reward += opt_.ppo.gamma * value[i];
        batch_.rewards[r] = reward;
        batch_.dones[r] = is_terminal(res.event) ? 1 : 0;
        batch_.events[r] = res.event;
        const auto terms = res.reward.values();
        for (std::size_t k = 0; k < terms.size(); ++k) term_sums[k] += terms[k];
        if (res.speed < opt_.rewards.stall_speed_threshold && !res.in_goal_region) ++stats.slow_steps;
        ++stats.steps;
        episode_return_[i] += res.reward.total;
        if (is_terminal(res.event)) {
          ++stats.episodes;
          returns_sum += episode_return_[i];
          if (res.event == StepEvent::GoalReached) ++successes;
          episode_return_[i] = 0.0;
        }
      }
    }
    const auto& cur = envs_.observations();
    for (int i = 0; i < N; ++i) {
      obs.row(i) = Eigen::Map<const Eigen::RowVectorXf>(cur[i].values.data(), kObsDim);
    }
    infer(net_, obs, mean, value, opt_.workers);
    batch_.bootstrap = value;

    if (stats.episodes > 0) {
      stats.mean_return = returns_sum / stats.episodes;
      stats.success_rate = static_cast<double>(successes) / stats.episodes;
    }
    stats.slow_fraction = static_cast<double>(stats.slow_steps) / static_cast<double>(stats.steps);
    for (std::size_t k = 0; k < term_sums.size(); ++k) {
      stats.reward_terms[k] = term_sums[k] / static_cast<double>(stats.steps);
    }
  }

  void update(IterationStats& stats) {
    const int N = batch_.num_envs, T = batch_.steps;
    const std::size_t total = static_cast<std::size_t>(N) * T;
    std::vector<double> adv(total), ret(total);
    for (int i = 0; i < N; ++i) {
      const std::size_t r0 = batch_.row(i, 0);
      const auto g = compute_gae(std::span(batch_.rewards).subspan(r0, T),
                                 std::span(batch_.values).subspan(r0, T),
                                 std::span(batch_.dones).subspan(r0, T), batch_.bootstrap[i],
                                 opt_.ppo.gamma, opt_.ppo.gae_lambda);
      std::copy(g.advantages.begin(), g.advantages.end(), adv.begin() + r0);
      std::copy(g.returns.begin(), g.returns.end(), ret.begin() + r0);
    }
    normalize_advantages(adv, opt_.ppo.adv_eps);

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const int M = static_cast<int>(total) / opt_.ppo.minibatches;
    std::vector<float> grad(parameter_count());
    Minibatch<float> mb;
    PpoLossTerms acc;
    int updates = 0;
    for (int epoch = 0; epoch < opt_.ppo.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng_);
      for (int b = 0; b < opt_.ppo.minibatches; ++b) {
        mb.obs.resize(M, kObsDim);
        mb.actions.resize(M, kActionDim);
        mb.logp_old.resize(M);
        mb.advantages.resize(M);
        mb.returns.resize(M);
        for (int k = 0; k < M; ++k) {
          const std::size_t r = order[static_cast<std::size_t>(b) * M + k];
          mb.obs.row(k) = batch_.obs.row(static_cast<Eigen::Index>(r));
          mb.actions.row(k) = batch_.actions.row(static_cast<Eigen::Index>(r));
          mb.logp_old[k] = batch_.logp_old[r];
          mb.advantages[k] = adv[r];
          mb.returns[k] = ret[r];
        }
        const auto terms = ppo_loss<float>(net_, mb, opt_.ppo, grad, opt_.workers);
        clip_grad_norm<float>(grad, opt_.ppo.max_grad_norm);
        adam_.step(net_.params(), grad);
        acc.policy_loss += terms.policy_loss;
        acc.value_loss += terms.value_loss;
        acc.entropy += terms.entropy;
        acc.total += terms.total;
        acc.clip_fraction += terms.clip_fraction;
        acc.approx_kl += terms.approx_kl;
        ++updates;
      }
    }
    const double inv = 1.0 / updates;
    stats.loss = {acc.policy_loss * inv, acc.value_loss * inv, acc.entropy * inv,
                  acc.total * inv,       acc.clip_fraction * inv, acc.approx_kl * inv};
  }

  TrainerOptions opt_;
  ActorCritic<float> net_;
  Adam<float> adam_;
  VecEnv envs_;
  Rng shuffle_rng_;
  std::vector<Rng> action_rngs_;
  std::vector<double> episode_return_;
  RolloutBatch batch_;
  int iteration_ = 0;
};

/// Column names of the metrics CSV, in order.
inline std::vector<std::string> metrics_columns() {
  std::vector<std::string> cols = {"iteration",   "wall_ms",       "episodes",    "mean_return",
                                   "success_rate", "mean_level",   "policy_loss", "value_loss",
                                   "entropy",      "total_loss",   "clip_fraction", "approx_kl",
                                   "slow_fraction"};
  for (auto name : RewardTerms::kNames) cols.push_back("r_" + std::string(name));
  for (int l = 1; l <= kCurriculumLevels; ++l) cols.push_back("level_" + std::to_string(l));
  return cols;
}

inline std::string metrics_row(const IterationStats& s, bool record_wall_time) {
  std::ostringstream os;
  os << std::setprecision(10);
  auto num = [&](double v) {
    if (std::isnan(v)) os << "nan";
    else os << v;
  };
  os << s.iteration << ',';
  num(record_wall_time ? s.wall_ms : 0.0);
  os << ',' << s.episodes << ',';
  num(s.mean_return);
  os << ',';
  num(s.success_rate);
  for (double v : {s.mean_level, s.loss.policy_loss, s.loss.value_loss, s.loss.entropy,
                   s.loss.total, s.loss.clip_fraction, s.loss.approx_kl, s.slow_fraction}) {
    os << ',';
    num(v);
  }
  for (double v : s.reward_terms) {
    os << ',';
    num(v);
  }
  for (int c : s.level_histogram) os << ',' << c;
  return os.str();
}

}  // namespace stairclimb
