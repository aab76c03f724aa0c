#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "otapg/channel.hpp"
#include "otapg/envs.hpp"
#include "otapg/pg.hpp"

namespace otapg {

// v_k = sum_i h_{i,k} g_i + n_k, with the draws kept for diagnostics.
struct ReceivedSignal {
  Vec v;
  Vec gains;  // h_{i,k}, one per agent
  Vec noise;  // n_k
  int round = 0;
};

struct EvalConfig {
  int m_eval = 0;      // rollouts per evaluation; 0 disables evaluation
  int eval_every = 1;  // evaluate rounds k with k % eval_every == 0
};

struct FedConfig {
  int N = 1;
  int M = 1;
  int K = 1;
  double alpha = 1e-4;
  ChannelModel channel = ChannelModel::ideal();
  double noise_var = 0.0;
  std::uint64_t seed = 0;
  // Diagnostic only: divide the received signal by m_h as well as N.
  bool rescale_by_mh = false;
  EvalConfig eval;
  int replicate = 0;
  bool record_wallclock = false;

  void validate() const;
};

struct RoundRecord {
  int replicate = 0;
  int k = 0;
  double cum_reward_eval = 0.0;  // -J estimate from the evaluation rollouts
  double grad_norm_sq_unbiased = 0.0;
  double grad_norm_sq_naive = 0.0;
  double theta_norm = 0.0;
  std::int64_t wallclock_ms = 0;
};

struct RunResult {
  std::vector<ParamVector> iterates;  // theta^0 .. theta^K
  std::vector<RoundRecord> records;   // evaluated rounds only
};

// Substream layout below a run's root stream RngStream(seed, 0):
//   agent i, round k:  root.fork({kAgent, k, i})  (trajectory m: .fork(m))
//   gain of agent i:   root.fork({kChannel, k, i})
//   noise, round k:    root.fork({kNoise, k})
//   evaluation:        root.fork({kEval, k})
RngStream agent_stream(const RngStream& root, int round, int agent);
RngStream channel_stream(const RngStream& root, int round, int agent);
RngStream noise_stream(const RngStream& root, int round);
RngStream eval_stream(const RngStream& root, int round);

// Superposition over the channel. Gains come from channel_stream(root, round, i)
// and the noise from noise_stream(root, round).
ReceivedSignal ota_aggregate(std::span<const GradientEstimate> estimates, const ChannelModel& channel,
                             double noise_var, const RngStream& root, int round);

// theta - alpha * v / N
ParamVector server_update(const ParamVector& params, const ReceivedSignal& signal, double alpha, int N);

// theta - alpha * (1/N) sum_i g_i
ParamVector baseline_update(const ParamVector& params, std::span<const GradientEstimate> estimates,
                            double alpha);

// Federated policy gradient with error-free averaging.
RunResult run_algorithm1(const Environment& env, const Policy& policy, const ParamVector& theta0,
                         const FedConfig& cfg);

// Over-the-air federated policy gradient.
RunResult run_algorithm2(const Environment& env, const Policy& policy, const ParamVector& theta0,
                         const FedConfig& cfg);

}  // namespace otapg
