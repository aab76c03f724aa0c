#include "otapg/pg.hpp"

#include <cmath>

#include <fmt/format.h>

namespace otapg {

TrajectoryTerm gpomdp_trajectory_term(const Environment& env, const Policy& policy,
                                      const ParamVector& params, RngStream& stream) {
  if (policy.n_actions() != env.n_actions())
    throw ContractError("gpomdp: policy and environment disagree on action count");
  const std::size_t d = params.size();
  TrajectoryTerm out{Vec(d, 0.0), 0.0};
  Vec phi(d, 0.0);
  Vec score;
  State state = env.reset(stream);
  const double gamma = env.discount();
  double weight = 1.0;
  for (int t = 0; t < env.horizon(); ++t) {
    const int a = policy.sample_with_score(params, state, stream, score);
    auto [next, loss] = env.step(state, a, stream);
    axpy(1.0, score, phi);
    axpy(weight * loss, phi, out.grad);
    out.discounted_loss += weight * loss;
    weight *= gamma;
    state = std::move(next);
  }
  return out;
}

Vec gpomdp_term(const Trajectory& traj, const Policy& policy, const ParamVector& params,
                double gamma) {
  Vec grad(params.size(), 0.0);
  Vec phi(params.size(), 0.0);
  double weight = 1.0;
  for (std::size_t t = 0; t < traj.actions.size(); ++t) {
    axpy(1.0, policy.grad_log_prob(params, traj.states[t], traj.actions[t]), phi);
    axpy(weight * traj.losses[t], phi, grad);
    weight *= gamma;
  }
  return grad;
}

GradientEstimate gpomdp_estimate(const Environment& env, const Policy& policy,
                                 const ParamVector& params, int batch_size, const RngStream& stream,
                                 int agent_id) {
  if (batch_size < 1) throw ParameterError("gpomdp_estimate: batch size must be >= 1");
  GradientEstimate est{Vec(params.size(), 0.0), batch_size, agent_id};
  for (int m = 0; m < batch_size; ++m) {
    RngStream traj_stream = stream.fork(static_cast<std::uint64_t>(m));
    axpy(1.0, gpomdp_trajectory_term(env, policy, params, traj_stream).grad, est.vector);
  }
  for (auto& x : est.vector) x /= batch_size;
  return est;
}

namespace {

// Depth-first walk over all trajectories with nonzero probability. Terms at
// step t only depend on the prefix up to a_t, so they are weighted by the
// prefix probability instead of being pushed to the leaves.
class Enumerator {
 public:
  Enumerator(const TabularMdp& env, const Policy& policy, const ParamVector& params, bool want_grad)
      : env_(env), want_grad_(want_grad), d_(params.size()) {
    const double size = static_cast<double>(env.n_states()) *
                        std::pow(static_cast<double>(env.n_actions() * env.n_states()), env.horizon());
    if (size > kMaxEnumeration) throw EnumerationTooLarge(size);
    if (policy.n_actions() != env.n_actions())
      throw ContractError("exact oracle: policy and environment disagree on action count");
    const std::size_t S = env.n_states(), A = env.n_actions();
    probs_.resize(S);
    if (want_grad_) scores_.resize(S * A);
    for (std::size_t s = 0; s < S; ++s) {
      const State st{static_cast<double>(s)};
      probs_[s] = policy.action_probs(params, st);
      if (want_grad_)
        for (std::size_t a = 0; a < A; ++a)
          scores_[s * A + a] = policy.grad_log_prob(params, st, static_cast<int>(a));
    }
    grad_.assign(d_, 0.0);
  }

  void run() {
    Vec phi(want_grad_ ? d_ : 0, 0.0);
    for (std::size_t s = 0; s < env_.n_states(); ++s)
      if (env_.initial(s) > 0.0) visit(0, s, env_.initial(s), 1.0, phi);
  }

  const Vec& grad() const { return grad_; }
  double objective() const { return objective_; }
  std::uint64_t count() const { return count_; }

 private:
  void visit(int t, std::size_t s, double prob, double weight, const Vec& phi) {
    if (t == env_.horizon()) {
      ++count_;
      return;
    }
    const std::size_t A = env_.n_actions();
    Vec next_phi;
    for (std::size_t a = 0; a < A; ++a) {
      const double pa = prob * probs_[s][a];
      if (pa == 0.0) continue;
      const double l = env_.loss(s, a);
      objective_ += pa * weight * l;
      if (want_grad_) {
        next_phi = phi;
        axpy(1.0, scores_[s * A + a], next_phi);
        axpy(pa * weight * l, next_phi, grad_);
      }
      for (std::size_t s2 = 0; s2 < env_.n_states(); ++s2) {
        const double p = env_.transition(s, a, s2);
        if (p > 0.0) visit(t + 1, s2, pa * p, weight * env_.discount(), next_phi);
      }
    }
  }

  const TabularMdp& env_;
  bool want_grad_;
  std::size_t d_;
  std::vector<Vec> probs_;
  std::vector<Vec> scores_;
  Vec grad_;
  double objective_ = 0.0;
  std::uint64_t count_ = 0;
};

}  // namespace

ExactGradient exact_gradient(const TabularMdp& env, const Policy& policy, const ParamVector& params) {
  Enumerator e(env, policy, params, true);
  e.run();
  return {e.grad(), e.count()};
}

double exact_objective(const TabularMdp& env, const Policy& policy, const ParamVector& params) {
  Enumerator e(env, policy, params, false);
  e.run();
  return e.objective();
}

double grad_norm_sq_estimate(const Environment& env, const Policy& policy, const ParamVector& params,
                             int m_eval, const RngStream& stream) {
  if (m_eval < 2 || m_eval % 2 != 0)
    throw ParameterError(fmt::format("grad_norm_sq_estimate: M_eval must be even and >= 2, got {}", m_eval));
  const auto g1 = gpomdp_estimate(env, policy, params, m_eval / 2, stream.fork(0));
  const auto g2 = gpomdp_estimate(env, policy, params, m_eval / 2, stream.fork(1));
  return dot(g1.vector, g2.vector);
}

EvalMetrics evaluate_policy(const Environment& env, const Policy& policy, const ParamVector& params,
                            int m_eval, const RngStream& stream) {
  if (m_eval < 2 || m_eval % 2 != 0)
    throw ParameterError(fmt::format("evaluate_policy: M_eval must be even and >= 2, got {}", m_eval));
  const int half = m_eval / 2;
  Vec g[2] = {Vec(params.size(), 0.0), Vec(params.size(), 0.0)};
  double loss = 0.0;
  for (int h = 0; h < 2; ++h) {
    const RngStream half_stream = stream.fork(static_cast<std::uint64_t>(h));
    for (int m = 0; m < half; ++m) {
      RngStream traj_stream = half_stream.fork(static_cast<std::uint64_t>(m));
      const auto term = gpomdp_trajectory_term(env, policy, params, traj_stream);
      axpy(1.0, term.grad, g[h]);
      loss += term.discounted_loss;
    }
    for (auto& x : g[h]) x /= half;
  }
  EvalMetrics out;
  out.mean_discounted_loss = loss / m_eval;
  out.grad_norm_sq_unbiased = dot(g[0], g[1]);
  Vec mean(params.size());
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = 0.5 * (g[0][i] + g[1][i]);
  out.grad_norm_sq_naive = norm_sq(mean);
  return out;
}

double trajectory_grad_bound(double G, double lbar, double gamma, int /*horizon*/) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("trajectory_grad_bound: gamma must be in (0,1)");
  return G * lbar * gamma / ((1.0 - gamma) * (1.0 - gamma));
}

}  // namespace otapg
