#pragma once

#include <cstdint>
#include <vector>

namespace stairclimb::testing {

// Explicit double sum over future TD errors, cut at the first episode end.
inline std::vector<double> brute_force_gae(const std::vector<double>& r, const std::vector<double>& v,
                                           const std::vector<std::uint8_t>& done, double bootstrap,
                                           double gamma, double lambda) {
  const std::size_t T = r.size();
  auto value_after = [&](std::size_t k) { return k + 1 < T ? v[k + 1] : bootstrap; };
  std::vector<double> adv(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double weight = 1.0;
    for (std::size_t k = t; k < T; ++k) {
      const double delta = r[k] + (done[k] ? 0.0 : gamma * value_after(k)) - v[k];
      adv[t] += weight * delta;
      if (done[k]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

}  // namespace stairclimb::testing
