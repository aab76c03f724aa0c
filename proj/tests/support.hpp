#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "otapg/envs.hpp"
#include "otapg/policy.hpp"
#include "otapg/vec.hpp"

namespace otapg::testing {

// Welford running mean / variance.
struct Running {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double var() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double se() const { return std::sqrt(var() / static_cast<double>(n)); }
};

struct RunningVec {
  std::vector<Running> c;
  explicit RunningVec(std::size_t d) : c(d) {}
  void add(const Vec& x) {
    for (std::size_t i = 0; i < c.size(); ++i) c[i].add(x[i]);
  }
};

// Brute-force reference values for default_oracle_mdp(), computed with an
// independent Python enumeration (product of per-step probabilities over every
// trajectory, REINFORCE form cross-checked against the G(PO)MDP form).
inline const Vec kOracleGradAtZero = {-0.14280505536886431, 0.14280505536886431,
                                      -0.11425625920187515, 0.11425625920187515,
                                      -0.05791733053318176, 0.05791733053318176};
inline constexpr double kOracleObjectiveAtZero = 1.2162971485716623;
inline const Vec kOracleTheta = {0.3, -0.2, 0.5, 0.1, -0.4, 0.25};
inline const Vec kOracleGradAtTheta = {-0.14462693859143583, 0.14462693859143574,
                                       -0.10626731858950877, 0.10626731858950877,
                                       -0.04556196365019148, 0.04556196365019141};
inline constexpr double kOracleObjectiveAtTheta = 1.133317366966802;
inline constexpr double kOracleDpLowerBound = 0.6038421490808463;

// Single-state MDP whose dynamics ignore the action.
inline TabularMdp constant_chain(double loss, int horizon, double gamma, std::size_t actions = 2) {
  Vec p(actions, 1.0);
  return TabularMdp(1, actions, p, Vec(actions, loss), {1.0}, horizon, gamma, loss > 0 ? loss : 1.0);
}

inline constexpr double kFdFloor = 1e-4;

// Largest per-coordinate relative error between grad_log_prob and central
// differences of log_prob. The denominator is floored at 1e-4 so the absolute
// tolerance (1e-9 at rel 1e-5) stays above central-difference roundoff,
// about eps * |log pi| / h = 1e-10 at h = 1e-5. MLP coordinates that
// feed a hidden unit with |pre-activation| < 1e-7 sit on a ReLU kink and are skipped.
inline double fd_score_error(const Policy& pol, const ParamVector& theta, const State& state, int action,
                             double h = 1e-5) {
  const Vec g = pol.grad_log_prob(theta, state, action);
  std::vector<bool> skip(g.size(), false);
  if (const auto* mlp = dynamic_cast<const MlpSoftmaxPolicy*>(&pol)) {
    const Vec pre = mlp->hidden_preactivations(theta, state);
    const std::size_t in = theta.shape().input_dim, hid = theta.shape().hidden_dim;
    for (std::size_t j = 0; j < hid; ++j) {
      if (std::abs(pre[j]) >= 1e-7) continue;
      for (std::size_t k = 0; k < in; ++k) skip[j * in + k] = true;
      skip[hid * in + j] = true;
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (skip[i]) continue;
    const double fd =
        (pol.log_prob(theta.perturbed(i, h), state, action) - pol.log_prob(theta.perturbed(i, -h), state, action)) /
        (2 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(std::abs(g[i]), kFdFloor));
  }
  return worst;
}

// Fourth-order central difference f'(0) ~ (-f(2h) + 8f(h) - 8f(-h) + f(-2h)) / 12h.
template <class F>
double five_point_derivative(F&& f, double h) {
  return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
}

}  // namespace otapg::testing
