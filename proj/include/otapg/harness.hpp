#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otapg/envs.hpp"
#include "otapg/ota.hpp"
#include "otapg/theory.hpp"

namespace otapg {

enum class EnvKind { Landmark, Tabular };
enum class GapMode { Loose, Oracle };

struct EnvSpec {
  EnvKind kind = EnvKind::Landmark;
  LandmarkParams landmark;
  std::string tabular_file;                    // empty: generated from tabular_seed
  std::uint64_t tabular_seed = kOracleMdpSeed;
  int tabular_states = 3;
  int tabular_actions = 2;
  int horizon = 20;
  double gamma = 0.99;
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::MlpSoftmax;
  int hidden_dim = 16;
};

// alpha is either a number or "max", meaning 1/(m_h L) for the grid point's channel.
struct StepSize {
  bool use_max = false;
  double value = 0.0;  // 0: per-channel default (1e-3 for Nakagami, 1e-4 otherwise)
};

struct ExperimentConfig {
  EnvSpec env;
  PolicySpec policy;
  int algorithm = 2;
  int N = 1;
  int M = 10;
  int K = 100;
  StepSize alpha;
  ChannelModel channel = ChannelModel::rayleigh(1.0);
  double noise_var = 1e-6;
  std::uint64_t seed = 1;
  bool rescale_by_mh = false;
  EvalConfig eval{10, 10};
  int replicates = 20;
  std::filesystem::path output_dir = "out";
  int jobs = 1;
  bool record_wallclock = false;
  // Score bounds for the bound report; analytic ones are used when the policy has them.
  std::optional<double> G;
  std::optional<double> F;
  GapMode gap = GapMode::Oracle;

  // Sweeps; an empty list means "the scalar value above".
  std::vector<int> grid_N;
  std::vector<int> grid_M;
  std::vector<ChannelModel> grid_channel;
  std::vector<StepSize> grid_alpha;

  void validate() const;
};

// JSON schema (all keys optional, defaults as in ExperimentConfig):
// {
//   "env": {"kind": "landmark"|"tabular", "horizon": 20, "gamma": 0.99,
//           "arena_half_width": 1, "step_size": 0.1, "landmark": "uniform"|"fixed",
//           "file": "mdp.txt", "seed": 20240611, "n_states": 3, "n_actions": 2},
//   "policy": {"kind": "mlp"|"tabular", "hidden_dim": 16},
//   "fed": {"algorithm": 1|2, "N": 1, "M": 10, "K": 100, "alpha": 1e-4 | "max",
//           "channel": <channel>, "noise_var": 1e-6 | "noise_db": -60,
//           "seed": 1, "rescale_by_mh": false},
//   "eval": {"M_eval": 10, "eval_every": 10},
//   "replicates": 20, "output_dir": "out", "jobs": 1, "record_wallclock": false,
//   "constants": {"G": ..., "F": ...}, "gap": "oracle"|"loose",
//   "grid": {"N": [...], "M": [...], "channel": [<channel>...], "alpha": [...]}
// }
// <channel> is "ideal" | "rayleigh" | "nakagami" or an object
// {"kind": "rayleigh", "scale": 1} | {"kind": "nakagami", "m": 0.1, "omega": 1} |
// {"kind": "deterministic", "gain": 2} | {"kind": "moments", "mean": 1, "var": 10} | {"kind": "ideal"}.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});
// Applies "a.b.c=value" (value parsed as JSON when possible, else as a string).
void apply_override(nlohmann::json& j, const std::string& assignment);
ChannelModel parse_channel(const nlohmann::json& j);

std::unique_ptr<Environment> make_environment(const EnvSpec& spec);
std::unique_ptr<Policy> make_policy_for(const PolicySpec& spec, const Environment& env);

struct GridPoint {
  int N = 1;
  int M = 1;
  ChannelModel channel = ChannelModel::ideal();
  double alpha = 0.0;

  // N{N}_M{M}_{channel}_a{alpha}
  std::string stem() const;
};

std::vector<GridPoint> expand_grid(const ExperimentConfig& cfg, const ProblemConstants* constants);

// hash(seed, r)
std::uint64_t replicate_seed(std::uint64_t seed, int replicate);

FedConfig fed_config_for(const ExperimentConfig& cfg, const GridPoint& gp, int replicate);
ParamVector initial_params_for(const Policy& policy, std::uint64_t replicate_seed);

// Analytic (G, F, lbar, gamma) when the policy provides them, else config values.
std::optional<ProblemConstants> problem_constants(const ExperimentConfig& cfg, const Environment& env,
                                                  const Policy& policy);

inline constexpr const char* kRoundCsvHeader =
    "replicate,k,cum_reward_eval,grad_norm_sq_unbiased,grad_norm_sq_naive,theta_norm,wallclock_ms";

std::string format_round_row(const RoundRecord& r);
std::vector<RoundRecord> read_round_csv(const std::filesystem::path& path);

struct GridSummary {
  GridPoint point;
  int replicates = 0;
  double final_reward_mean = 0.0;
  double final_reward_std = 0.0;
  double time_avg_grad_norm_sq_mean = 0.0;
  double time_avg_grad_norm_sq_std = 0.0;
  std::filesystem::path csv;
};

struct ExperimentResult {
  std::vector<GridSummary> summaries;
};

// Writes one round CSV per grid point, summary.csv and bounds.csv into cfg.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Aggregated band files under <csv_dir>/plot/: {stem}_reward.csv (mean and
// +-1 sample-std band of cum_reward_eval per k) and {stem}_gradnorm.csv (the
// running average of grad_norm_sq_unbiased per replicate, then mean/std).
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& csv_dir);

struct VerifyRow {
  GridPoint point;
  std::int64_t K = 0;
  double empirical = 0.0;  // replicate mean of (1/K) sum_k ||grad J(theta^k)||^2, exact oracle
  double empirical_se = 0.0;
  bool channel_condition = false;
  std::optional<double> theorem1;
  double theorem2 = 0.0;
  double gap = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::vector<VerifyRow> rows;
  bool all_pass = false;
};

// Requires a tabular environment and tabular policy; throws PreconditionError
// when the stepsize condition fails for any grid point.
VerifyReport verify_bounds(const ExperimentConfig& cfg);
void print_verify_report(std::ostream& os, const VerifyReport& report);

// (1/K) sum_{k<K} ||grad J(theta^k)||^2 along a run, using the exact oracle.
double time_averaged_exact_grad_norm_sq(const TabularMdp& env, const Policy& policy,
                                        const RunResult& run);

// Finite-horizon DP optimum over all (history-dependent) policies: a lower bound on J*.
double optimal_loss_lower_bound(const TabularMdp& env);

// Runs `count` independent tasks on at most `jobs` threads.
void parallel_for(int count, int jobs, const std::function<void(int)>& task);

}  // namespace otapg
