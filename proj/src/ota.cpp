#include "otapg/ota.hpp"

#include <chrono>

#include <fmt/format.h>

namespace otapg {

void FedConfig::validate() const {
  if (N < 1) throw ParameterError("N must be >= 1");
  if (M < 1) throw ParameterError("M must be >= 1");
  if (K < 1) throw ParameterError("K must be >= 1");
  if (!(alpha > 0.0)) throw ParameterError("alpha must be > 0");
  if (!(noise_var >= 0.0)) throw ParameterError("noise variance must be >= 0");
  if (eval.m_eval != 0 && (eval.m_eval < 2 || eval.m_eval % 2 != 0))
    throw ParameterError("M_eval must be even and >= 2 (or 0 to disable evaluation)");
  if (eval.eval_every < 1) throw ParameterError("eval_every must be >= 1");
}

RngStream agent_stream(const RngStream& root, int round, int agent) {
  return root.fork({stream_tag::kAgent, static_cast<std::uint64_t>(round),
                    static_cast<std::uint64_t>(agent)});
}
RngStream channel_stream(const RngStream& root, int round, int agent) {
  return root.fork({stream_tag::kChannel, static_cast<std::uint64_t>(round),
                    static_cast<std::uint64_t>(agent)});
}
RngStream noise_stream(const RngStream& root, int round) {
  return root.fork({stream_tag::kNoise, static_cast<std::uint64_t>(round)});
}
RngStream eval_stream(const RngStream& root, int round) {
  return root.fork({stream_tag::kEval, static_cast<std::uint64_t>(round)});
}

ReceivedSignal ota_aggregate(std::span<const GradientEstimate> estimates, const ChannelModel& channel,
                             double noise_var, const RngStream& root, int round) {
  if (estimates.empty()) throw ContractError("ota_aggregate: no estimates");
  const std::size_t d = estimates.front().vector.size();
  ReceivedSignal sig;
  sig.round = round;
  sig.v.assign(d, 0.0);
  sig.gains.resize(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].vector.size() != d)
      throw ContractError(fmt::format("ota_aggregate: estimate {} has dimension {}, expected {}", i,
                                      estimates[i].vector.size(), d));
    RngStream gs = channel_stream(root, round, static_cast<int>(i));
    sig.gains[i] = draw_channel_gain(gs, channel);
    axpy(sig.gains[i], estimates[i].vector, sig.v);
  }
  RngStream ns = noise_stream(root, round);
  sig.noise = draw_gaussian_vector(ns, d, noise_var);
  for (std::size_t j = 0; j < d; ++j) sig.v[j] += sig.noise[j];
  return sig;
}

namespace {

ParamVector step_from_sum(const ParamVector& params, std::span<const double> sum, double alpha, int N) {
  if (sum.size() != params.size()) throw ContractError("update: dimension mismatch");
  Vec theta = params.vec();
  for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= alpha * (sum[j] / N);
  return ParamVector(params.shape(), std::move(theta));
}

}  // namespace

ParamVector server_update(const ParamVector& params, const ReceivedSignal& signal, double alpha, int N) {
  if (!(alpha > 0.0)) throw ParameterError("server_update: alpha must be > 0");
  if (N < 1) throw ParameterError("server_update: N must be >= 1");
  return step_from_sum(params, signal.v, alpha, N);
}

ParamVector baseline_update(const ParamVector& params, std::span<const GradientEstimate> estimates,
                            double alpha) {
  if (estimates.empty()) throw ContractError("baseline_update: no estimates");
  if (!(alpha > 0.0)) throw ParameterError("baseline_update: alpha must be > 0");
  Vec sum(params.size(), 0.0);
  for (const auto& e : estimates) axpy(1.0, e.vector, sum);
  return step_from_sum(params, sum, alpha, static_cast<int>(estimates.size()));
}

namespace {

enum class Aggregation { Ideal, OverTheAir };

RunResult run_federated(const Environment& env, const Policy& policy, const ParamVector& theta0,
                        const FedConfig& cfg, Aggregation mode) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const RngStream root(cfg.seed, 0);
  RunResult out;
  out.iterates.reserve(static_cast<std::size_t>(cfg.K) + 1);
  out.iterates.push_back(theta0);
  std::vector<GradientEstimate> estimates(static_cast<std::size_t>(cfg.N));
  const double alpha = cfg.rescale_by_mh ? cfg.alpha / cfg.channel.mean_gain() : cfg.alpha;

  for (int k = 0; k < cfg.K; ++k) {
    const ParamVector& theta = out.iterates.back();
    if (cfg.eval.m_eval > 0 && k % cfg.eval.eval_every == 0) {
      const auto m = evaluate_policy(env, policy, theta, cfg.eval.m_eval, eval_stream(root, k));
      RoundRecord rec;
      rec.replicate = cfg.replicate;
      rec.k = k;
      rec.cum_reward_eval = -m.mean_discounted_loss;
      rec.grad_norm_sq_unbiased = m.grad_norm_sq_unbiased;
      rec.grad_norm_sq_naive = m.grad_norm_sq_naive;
      rec.theta_norm = norm(theta.values());
      if (cfg.record_wallclock)
        rec.wallclock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - start)
                               .count();
      out.records.push_back(rec);
    }
    for (int i = 0; i < cfg.N; ++i)
      estimates[static_cast<std::size_t>(i)] =
          gpomdp_estimate(env, policy, theta, cfg.M, agent_stream(root, k, i), i);
    if (mode == Aggregation::Ideal) {
      out.iterates.push_back(baseline_update(theta, estimates, alpha));
    } else {
      const auto sig = ota_aggregate(estimates, cfg.channel, cfg.noise_var, root, k);
      out.iterates.push_back(server_update(theta, sig, alpha, cfg.N));
    }
  }
  return out;
}

}  // namespace

RunResult run_algorithm1(const Environment& env, const Policy& policy, const ParamVector& theta0,
                         const FedConfig& cfg) {
  return run_federated(env, policy, theta0, cfg, Aggregation::Ideal);
}

RunResult run_algorithm2(const Environment& env, const Policy& policy, const ParamVector& theta0,
                         const FedConfig& cfg) {
  return run_federated(env, policy, theta0, cfg, Aggregation::OverTheAir);
}

}  // namespace otapg
