// otapg: run federated policy-gradient experiments and evaluate convergence bounds.
//
// Exit codes: 0 success, 1 config error, 2 runtime error, 3 bound-verification failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "otapg/harness.hpp"
#include "otapg/theory.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitBound = 3;

void print_bound_table(const otapg::BoundInputs& b) {
  using namespace otapg;
  const double L = smoothness_L(b.constants);
  const double V = variance_V(b.constants);
  const double lambda = lambda_NM(b.N, b.M, b.m_h, b.var_h);
  const bool chan = check_channel_condition(b.N, b.m_h, b.var_h);
  const bool step = check_stepsize(b.alpha, b.constants, b.m_h);
  fmt::print("G,F,lbar,gamma,m_h,sigma_h2,sigma2,N,M,K,alpha,gap,L,V,Lambda,alpha_max,"
             "channel_condition,stepsize_condition,theorem1_rhs,theorem2_rhs\n");
  std::string rhs1 = "NA", rhs2 = "NA";
  if (step) {
    rhs2 = fmt::format("{}", theorem2_rhs(b));
    if (chan) rhs1 = fmt::format("{}", theorem1_rhs(b));
  }
  fmt::print("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", b.constants.G, b.constants.F,
             b.constants.lbar, b.constants.gamma, b.m_h, b.var_h, b.noise_var, b.N, b.M, b.K, b.alpha, b.gap,
             L, V, lambda, max_stepsize(b.constants, b.m_h), chan ? 1 : 0, step ? 1 : 0, rhs1, rhs2);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Over-the-air federated policy gradient simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, in_dir;
  std::vector<std::string> overrides;
  int jobs = 0;

  auto* run = app.add_subcommand("run", "Run the experiment grid and write CSVs");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--override", overrides, "key.path=value, repeatable");
  run->add_option("--jobs", jobs, "Concurrent runs");

  auto* plot = app.add_subcommand("plot-data", "Aggregate round CSVs into band files");
  plot->add_option("--in", in_dir, "Directory with round CSVs")->required();

  auto* verify = app.add_subcommand("verify-bounds", "Check the convergence bounds on a tabular MDP");
  verify->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  verify->add_option("--override", overrides, "key.path=value, repeatable");
  verify->add_option("--jobs", jobs, "Concurrent runs");

  otapg::BoundInputs b;
  b.constants = {std::sqrt(2.0), 0.25, 1.0, 0.9};
  b.m_h = 1.0;
  double gap = -1.0;
  auto* table = app.add_subcommand("bound-table", "Evaluate the closed-form constants and bounds");
  table->add_option("--G", b.constants.G)->required();
  table->add_option("--F", b.constants.F)->required();
  table->add_option("--lbar", b.constants.lbar)->required();
  table->add_option("--gamma", b.constants.gamma)->required();
  table->add_option("--mh", b.m_h)->required();
  table->add_option("--sigh2", b.var_h)->required();
  table->add_option("--sigma2", b.noise_var)->required();
  table->add_option("--N", b.N)->required();
  table->add_option("--M", b.M)->required();
  table->add_option("--K", b.K)->required();
  table->add_option("--alpha", b.alpha)->required();
  table->add_option("--gap", gap, "J(theta0) - J*; default lbar/(1-gamma)");

  double epsilon = 0.0;
  auto* plan = app.add_subcommand("plan", "Smallest (K, N, M) whose bound reaches epsilon");
  plan->add_option("--epsilon", epsilon)->required();
  plan->add_option("--G", b.constants.G)->required();
  plan->add_option("--F", b.constants.F)->required();
  plan->add_option("--lbar", b.constants.lbar)->required();
  plan->add_option("--gamma", b.constants.gamma)->required();
  plan->add_option("--mh", b.m_h)->required();
  plan->add_option("--sigh2", b.var_h)->required();
  plan->add_option("--sigma2", b.noise_var)->required();
  plan->add_option("--gap", gap, "J(theta0) - J*; default lbar/(1-gamma)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      if (!out_dir.empty()) overrides.push_back("output_dir=\"" + out_dir + "\"");
      if (jobs > 0) overrides.push_back("jobs=" + std::to_string(jobs));
      const auto cfg = otapg::load_config(config_path, overrides);
      const auto result = otapg::run_experiment(cfg);
      for (const auto& s : result.summaries)
        fmt::print("{}: final reward {:.6g} +- {:.3g}, time-avg grad norm^2 {:.6g} +- {:.3g}\n",
                   s.csv.filename().string(), s.final_reward_mean, s.final_reward_std,
                   s.time_avg_grad_norm_sq_mean, s.time_avg_grad_norm_sq_std);
    } else if (*plot) {
      for (const auto& p : otapg::emit_plot_data(in_dir)) fmt::print("{}\n", p.string());
    } else if (*verify) {
      if (jobs > 0) overrides.push_back("jobs=" + std::to_string(jobs));
      const auto cfg = otapg::load_config(config_path, overrides);
      const auto report = otapg::verify_bounds(cfg);
      otapg::print_verify_report(std::cout, report);
      return report.all_pass ? kExitOk : kExitBound;
    } else if (*table) {
      b.gap = gap >= 0.0 ? gap : b.constants.lbar / (1.0 - b.constants.gamma);
      b.validate();
      print_bound_table(b);
    } else if (*plan) {
      const auto channel = otapg::ChannelModel::moments(b.m_h, b.var_h);
      const auto p = otapg::plan_for_epsilon(epsilon, b.constants, channel, b.noise_var, gap);
      fmt::print("K,N,M,alpha,theorem1_rhs\n{},{},{},{},{}\n", p.K, p.N, p.M, p.alpha, p.rhs);
    }
  } catch (const otapg::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const otapg::ParameterError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const otapg::DomainError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const otapg::PreconditionError& e) {
    fmt::print(stderr, "precondition failed: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
