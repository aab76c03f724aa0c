#include "otapg/theory.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace otapg {
namespace {

// Slack for alpha computed as exactly 1/(m_h L) by the caller.
constexpr double kStepsizeSlack = 1e-12;

void require_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError(fmt::format("gamma = {} is not in (0, 1)", gamma));
}

}  // namespace

void ProblemConstants::validate() const {
  require_gamma(gamma);
  if (!(G > 0.0) || !(F > 0.0) || !(lbar > 0.0))
    throw ParameterError("problem constants G, F, lbar must be > 0");
}

void BoundInputs::validate() const {
  constants.validate();
  if (N < 1 || M < 1 || K < 1) throw ParameterError("N, M, K must be >= 1");
  if (!(alpha > 0.0)) throw ParameterError("alpha must be > 0");
  if (!(gap >= 0.0)) throw ParameterError("optimality gap must be >= 0");
  if (!(m_h > 0.0) || !(var_h >= 0.0) || !(noise_var >= 0.0))
    throw ParameterError("channel moments / noise variance out of range");
}

double smoothness_L(const ProblemConstants& c) {
  require_gamma(c.gamma);
  const double g2 = c.G * c.G;
  const double one_minus = 1.0 - c.gamma;
  return (c.F + g2 + 2.0 * c.gamma * g2 / one_minus) * c.gamma * c.lbar / (one_minus * one_minus);
}

double variance_V(const ProblemConstants& c) {
  require_gamma(c.gamma);
  return c.G * c.lbar * c.gamma / ((1.0 - c.gamma) * (1.0 - c.gamma));
}

double lambda_NM(int N, int M, double m_h, double var_h) {
  if (N < 1 || M < 1) throw ParameterError("lambda_NM: N and M must be >= 1");
  return M * (N + 1.0) * m_h * m_h - (M - 1.0) * var_h;
}

bool check_channel_condition(int N, double m_h, double var_h) {
  return var_h <= (N + 1.0) * m_h * m_h;
}

double max_stepsize(const ProblemConstants& c, double m_h) { return 1.0 / (m_h * smoothness_L(c)); }

bool check_stepsize(double alpha, const ProblemConstants& c, double m_h) {
  return alpha <= max_stepsize(c, m_h) * (1.0 + kStepsizeSlack);
}

namespace {

void require_stepsize(const BoundInputs& b) {
  if (!check_stepsize(b.alpha, b.constants, b.m_h))
    throw PreconditionError(fmt::format("stepsize condition alpha <= 1/(m_h L) violated: alpha = {:g} > {:g}",
                                        b.alpha, max_stepsize(b.constants, b.m_h)));
}

}  // namespace

double theorem1_rhs(const BoundInputs& b) {
  b.validate();
  if (!check_channel_condition(b.N, b.m_h, b.var_h))
    throw PreconditionError(fmt::format(
        "channel condition sigma_h^2 <= (N+1) m_h^2 violated: {:g} > {:g}", b.var_h,
        (b.N + 1.0) * b.m_h * b.m_h));
  require_stepsize(b);
  const double lambda = lambda_NM(b.N, b.M, b.m_h, b.var_h);
  const double V = variance_V(b.constants);
  const double MN = static_cast<double>(b.M) * b.N;
  return 2.0 * MN * b.m_h * b.gap / (b.alpha * lambda * static_cast<double>(b.K)) +
         b.M * b.m_h * b.m_h * b.noise_var / (b.N * lambda) + b.var_h * V * V / lambda;
}

double theorem2_rhs(const BoundInputs& b) {
  b.validate();
  require_stepsize(b);
  const double D = b.M * (b.N + 1.0) * b.m_h * b.m_h + b.var_h;
  const double V = variance_V(b.constants);
  const double MN = static_cast<double>(b.M) * b.N;
  return 2.0 * MN * b.m_h * b.gap / (b.alpha * static_cast<double>(b.K) * D) +
         b.M * b.var_h * V * V / D + b.var_h * V * V / D +
         b.M * b.m_h * b.m_h * b.noise_var / (b.N * D);
}

double variance_bound_rhs(int N, int M, double m_h, double var_h, double noise_var, double V,
                          double grad_norm_sq) {
  if (N < 1 || M < 1) throw ParameterError("variance_bound_rhs: N and M must be >= 1");
  const double MNm2 = static_cast<double>(M) * N * m_h * m_h;
  return noise_var / (static_cast<double>(N) * N) + var_h * V * V / MNm2 +
         (M * (var_h - m_h * m_h) - var_h) / MNm2 * grad_norm_sq;
}

Plan plan_for_epsilon(double epsilon, const ProblemConstants& c, const ChannelModel& channel,
                      double noise_var, double gap, int max_agents, int max_batch) {
  if (!(epsilon > 0.0)) throw ParameterError("plan_for_epsilon: epsilon must be > 0");
  c.validate();
  const double m_h = channel.mean_gain();
  const double var_h = channel.var_gain();
  if (gap <= 0.0) gap = c.lbar / (1.0 - c.gamma);

  BoundInputs b;
  b.constants = c;
  b.m_h = m_h;
  b.var_h = var_h;
  b.noise_var = noise_var;
  b.alpha = max_stepsize(c, m_h);
  b.gap = gap;

  Plan best;
  double best_cost = std::numeric_limits<double>::infinity();
  constexpr auto kMaxK = std::numeric_limits<std::int64_t>::max() / 4;
  for (int N = 1; N <= max_agents; N *= 2) {
    if (!check_channel_condition(N, m_h, var_h)) continue;
    for (int M = 1; M <= max_batch; M *= 2) {
      b.N = N;
      b.M = M;
      // rhs(K) = A / K + floor.
      b.K = std::numeric_limits<std::int64_t>::max();
      b.gap = 0.0;
      const double floor = theorem1_rhs(b);
      if (floor >= epsilon) continue;
      b.gap = gap;
      b.K = 1;
      const double A = theorem1_rhs(b) - floor;
      const double k_real = std::ceil(A / (epsilon - floor));
      if (!(k_real < static_cast<double>(kMaxK))) continue;
      b.K = std::max<std::int64_t>(1, static_cast<std::int64_t>(k_real));
      while (theorem1_rhs(b) > epsilon) ++b.K;
      while (b.K > 1) {
        --b.K;
        if (theorem1_rhs(b) > epsilon) {
          ++b.K;
          break;
        }
      }
      const double cost = static_cast<double>(N) * M * static_cast<double>(b.K);
      if (cost < best_cost) {
        best_cost = cost;
        best = Plan{b.K, N, M, b.alpha, theorem1_rhs(b)};
      }
    }
  }
  if (best.N == 0)
    throw PreconditionError(fmt::format(
        "plan_for_epsilon: no configuration with N <= {} and M <= {} reaches epsilon = {:g}", max_agents,
        max_batch, epsilon));
  return best;
}

}  // namespace otapg
