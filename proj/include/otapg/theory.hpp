#pragma once

#include <cstdint>

#include "otapg/channel.hpp"

namespace otapg {

struct ProblemConstants {
  double G = 0.0;     // score-norm bound
  double F = 0.0;     // log-policy Hessian entry bound
  double lbar = 0.0;  // per-step loss bound
  double gamma = 0.0;

  void validate() const;
};

struct BoundInputs {
  ProblemConstants constants;
  double m_h = 1.0;
  double var_h = 0.0;      // sigma_h^2
  double noise_var = 0.0;  // sigma^2
  int N = 1;
  int M = 1;
  std::int64_t K = 1;
  double alpha = 0.0;
  double gap = 0.0;  // J(theta^0) - J(theta*), or any upper bound on it

  void validate() const;
};

// (F + G^2 + 2 gamma G^2 / (1 - gamma)) * gamma * lbar / (1 - gamma)^2
double smoothness_L(const ProblemConstants& c);

// G * lbar * gamma / (1 - gamma)^2
double variance_V(const ProblemConstants& c);

// M (N + 1) m_h^2 - (M - 1) sigma_h^2; negative when the channel condition fails badly.
double lambda_NM(int N, int M, double m_h, double var_h);

// sigma_h^2 <= (N + 1) m_h^2
bool check_channel_condition(int N, double m_h, double var_h);

// 1 / (m_h L)
double max_stepsize(const ProblemConstants& c, double m_h);
bool check_stepsize(double alpha, const ProblemConstants& c, double m_h);

// Bound on (1/K) sum_k E||grad J(theta^k)||^2 under the channel condition.
// Throws PreconditionError naming the violated inequality.
double theorem1_rhs(const BoundInputs& b);

// Channel-condition-free bound; only the stepsize condition is required.
double theorem2_rhs(const BoundInputs& b);

// Upper bound on E||v_k / (m_h N) - grad J||^2 at a point with ||grad J||^2 = grad_norm_sq.
double variance_bound_rhs(int N, int M, double m_h, double var_h, double noise_var, double V,
                          double grad_norm_sq);

struct Plan {
  std::int64_t K = 0;
  int N = 0;
  int M = 0;
  double alpha = 0.0;
  double rhs = 0.0;  // theorem1_rhs at the plan
};

// Cheapest (N * M * K) configuration with theorem1_rhs <= epsilon at alpha = 1/(m_h L).
// N and M are searched over powers of two up to max_agents / max_batch; K is the
// smallest integer meeting the target for each (N, M). `gap` <= 0 means lbar/(1-gamma).
Plan plan_for_epsilon(double epsilon, const ProblemConstants& c, const ChannelModel& channel,
                      double noise_var, double gap = 0.0, int max_agents = 1 << 20,
                      int max_batch = 1 << 20);

}  // namespace otapg
