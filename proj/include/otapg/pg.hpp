#pragma once

#include <cstdint>

#include "otapg/envs.hpp"
#include "otapg/policy.hpp"

namespace otapg {

struct GradientEstimate {
  Vec vector;
  int batch_size = 0;
  int agent_id = 0;
};

struct ExactGradient {
  Vec vector;
  std::uint64_t enumerated_trajectories = 0;
};

// Largest enumeration (n_states * (n_actions * n_states)^T) the oracle accepts.
inline constexpr double kMaxEnumeration = 1e7;

// One trajectory's G(PO)MDP term sum_t gamma^t l_t phi(t), phi(t) = sum_{tau<=t} score_tau,
// together with the trajectory's discounted loss.
struct TrajectoryTerm {
  Vec grad;
  double discounted_loss = 0.0;
};

// Rolls out one trajectory from `stream` and accumulates its term in one pass.
TrajectoryTerm gpomdp_trajectory_term(const Environment& env, const Policy& policy,
                                      const ParamVector& params, RngStream& stream);

// The same term recomputed from a stored trajectory.
Vec gpomdp_term(const Trajectory& traj, const Policy& policy, const ParamVector& params, double gamma);

// Mini-batch G(PO)MDP: the mean of M trajectory terms. Trajectory m is drawn
// from stream.fork(m), so the result does not depend on evaluation order.
GradientEstimate gpomdp_estimate(const Environment& env, const Policy& policy,
                                 const ParamVector& params, int batch_size, const RngStream& stream,
                                 int agent_id = 0);

// Exact grad J by enumerating every trajectory with nonzero probability.
ExactGradient exact_gradient(const TabularMdp& env, const Policy& policy, const ParamVector& params);

// Exact J(theta) by the same enumeration.
double exact_objective(const TabularMdp& env, const Policy& policy, const ParamVector& params);

// <g1, g2> for two independent half-batch estimates: unbiased for ||grad J||^2
// and negative on some draws. Halves use stream.fork(0) and stream.fork(1).
double grad_norm_sq_estimate(const Environment& env, const Policy& policy, const ParamVector& params,
                             int m_eval, const RngStream& stream);

struct EvalMetrics {
  double mean_discounted_loss = 0.0;
  double grad_norm_sq_unbiased = 0.0;
  double grad_norm_sq_naive = 0.0;  // ||(g1 + g2) / 2||^2, biased upwards by the variance
};

// One pass over m_eval rollouts; grad_norm_sq_unbiased equals
// grad_norm_sq_estimate(env, policy, params, m_eval, stream).
EvalMetrics evaluate_policy(const Environment& env, const Policy& policy, const ParamVector& params,
                            int m_eval, const RngStream& stream);

// G * lbar * gamma / (1 - gamma)^2, the infinite-horizon bound on one trajectory term.
// The horizon does not enter.
double trajectory_grad_bound(double G, double lbar, double gamma, int horizon);

}  // namespace otapg
