#pragma once

// Central finite differences against the analytic PPO gradient, per block.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "stairclimb/ppo.hpp"

namespace stairclimb::testing {

struct BlockCheck {
  std::string name;
  std::size_t probed = 0;
  std::size_t kinked = 0;  // probes whose stencil flipped a max-pool winner; left out
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double analytic_norm = 0.0;
};

/// One seeded input row: random proprioception, a bumpy heightmap, an action
/// near the policy mean and a stale log-prob so both clip branches appear.
inline Minibatch<double> random_minibatch(const ActorCritic<double>& net, std::uint64_t seed,
                                          int rows) {
  Rng rng = make_stream(seed, 0x6C4EC, 0);
  Minibatch<double> mb;
  mb.obs.resize(rows, kObsDim);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < kProprioDim; ++c) mb.obs(r, c) = uniform(rng, -1.0, 1.0);
    for (int c = kProprioDim; c < kObsDim; ++c) mb.obs(r, c) = uniform(rng, -0.6, 0.4);
  }
  ForwardTrace<double> trace;
  net.forward(mb.obs, trace);
  const auto sd = net.action_std();
  mb.actions.resize(rows, kActionDim);
  for (int r = 0; r < rows; ++r) {
    double logp = 0.0;
    for (int j = 0; j < kActionDim; ++j) {
      mb.actions(r, j) = trace.mean(r, j) + sd[j] * uniform(rng, -1.5, 1.5);
      const double z = (mb.actions(r, j) - trace.mean(r, j)) / sd[j];
      logp += -0.5 * z * z - std::log(sd[j]) - kHalfLog2Pi;
    }
    mb.logp_old.push_back(logp + uniform(rng, -0.4, 0.4));
    mb.advantages.push_back(uniform(rng, -2.0, 2.0));
    mb.returns.push_back(uniform(rng, -1.0, 3.0));
  }
  return mb;
}

inline std::vector<BlockCheck> gradient_check(std::uint64_t seed, int rows = 1,
                                              std::size_t max_probes_per_block = 64,
                                              double h = 1e-4) {
  ActorCritic<double> net(seed);
  // Larger head outputs than the 0.01-gain init so the actor layers carry signal.
  Rng jitter = make_stream(seed, 0x717, 0);
  for (auto& p : net.block("actor.3.weight")) p += uniform(jitter, -0.1, 0.1);
  for (auto& p : net.block("actor.log_std")) p = uniform(jitter, -1.0, 0.0);
  for (const char* b : {"conv1.bias", "conv2.bias", "encoder.bias", "actor.0.bias", "critic.0.bias"}) {
    for (auto& p : net.block(b)) p = uniform(jitter, -0.1, 0.1);
  }
  const auto mb = random_minibatch(net, seed, rows);
  PpoConfig cfg;
  cfg.entropy_coef = 0.01;

  std::vector<double> grad(net.params().size());
  ppo_loss<double>(net, mb, cfg, grad);

  ForwardTrace<double> base, probe;
  net.forward(mb.obs, base);
  auto pool_winners_moved = [&] {
    net.forward(mb.obs, probe);
    return probe.arg1 != base.arg1 || probe.arg2 != base.arg2;
  };

  std::vector<BlockCheck> out;
  Rng pick = make_stream(seed, 0x9C, 1);
  for (const auto& block : parameter_layout()) {
    std::vector<std::size_t> idx(block.size);
    std::iota(idx.begin(), idx.end(), block.offset);
    if (idx.size() > max_probes_per_block) {
      std::shuffle(idx.begin(), idx.end(), pick);
      idx.resize(max_probes_per_block);
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    std::size_t kinked = 0;
    auto params = net.params();
    for (std::size_t k : idx) {
      const double saved = params[k];
      params[k] = saved + h;
      const double up = ppo_loss<double>(net, mb, cfg).total;
      const bool flip_up = pool_winners_moved();
      params[k] = saved - h;
      const double down = ppo_loss<double>(net, mb, cfg).total;
      const bool flip_down = pool_winners_moved();
      params[k] = saved;
      // Max pooling is not differentiable where the winner changes, so a
      // stencil straddling that point measures a secant, not a derivative.
      if (flip_up || flip_down) {
        ++kinked;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (grad[k] - numeric) * (grad[k] - numeric);
      a2 += grad[k] * grad[k];
      n2 += numeric * numeric;
    }
    BlockCheck c;
    c.name = block.name;
    c.probed = idx.size() - kinked;
    c.kinked = kinked;
    c.analytic_norm = std::sqrt(a2);
    const double scale = std::max({std::sqrt(a2), std::sqrt(n2), 1e-300});
    c.rel_error = std::sqrt(diff2) / scale;
    out.push_back(c);
  }
  return out;
}

}  // namespace stairclimb::testing
