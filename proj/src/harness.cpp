#include "otapg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace otapg {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
  }
}

StepSize parse_step(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "max") return {true, 0.0};
    throw ConfigError("alpha must be a number or \"max\"");
  }
  if (!j.is_number()) throw ConfigError("alpha must be a number or \"max\"");
  return {false, j.get<double>()};
}

}  // namespace

ChannelModel parse_channel(const json& j) {
  try {
    const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
    const json params = j.is_object() ? j : json::object();
    if (kind == "ideal") return ChannelModel::ideal();
    if (kind == "rayleigh") return ChannelModel::rayleigh(get_or(params, "scale", 1.0));
    if (kind == "nakagami")
      return ChannelModel::nakagami(get_or(params, "m", 0.1), get_or(params, "omega", 1.0));
    if (kind == "deterministic") return ChannelModel::deterministic(params.at("gain").get<double>());
    if (kind == "moments")
      return ChannelModel::moments(params.at("mean").get<double>(), params.at("var").get<double>());
    throw ConfigError("unknown channel kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("channel: ") + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("channel: ") + e.what());
  }
}

void ExperimentConfig::validate() const {
  if (algorithm != 1 && algorithm != 2) throw ConfigError("fed.algorithm must be 1 or 2");
  if (N < 1 || M < 1 || K < 1) throw ConfigError("fed.N, fed.M, fed.K must be >= 1");
  if (!alpha.use_max && alpha.value < 0.0) throw ConfigError("fed.alpha must be > 0");
  if (!(noise_var >= 0.0)) throw ConfigError("fed.noise_var must be >= 0");
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (eval.m_eval != 0 && (eval.m_eval < 2 || eval.m_eval % 2 != 0))
    throw ConfigError("eval.M_eval must be even and >= 2 (0 disables evaluation)");
  if (eval.eval_every < 1) throw ConfigError("eval.eval_every must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  for (int n : grid_N)
    if (n < 1) throw ConfigError("grid.N entries must be >= 1");
  for (int m : grid_M)
    if (m < 1) throw ConfigError("grid.M entries must be >= 1");
  for (const auto& a : grid_alpha)
    if (!a.use_max && !(a.value > 0.0)) throw ConfigError("grid.alpha entries must be > 0");
  if (env.horizon < 0) throw ConfigError("env.horizon must be >= 0");
  if (!(env.gamma > 0.0 && env.gamma < 1.0)) throw ConfigError("env.gamma must be in (0, 1)");
  if (policy.hidden_dim < 1) throw ConfigError("policy.hidden_dim must be >= 1");
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  const bool tabular_default = j.contains("env") && get_or<std::string>(j["env"], "kind", "landmark") == "tabular";
  if (j.contains("env")) {
    const json& e = j["env"];
    const auto kind = get_or<std::string>(e, "kind", "landmark");
    if (kind == "landmark") cfg.env.kind = EnvKind::Landmark;
    else if (kind == "tabular") cfg.env.kind = EnvKind::Tabular;
    else throw ConfigError("env.kind must be 'landmark' or 'tabular'");
    if (cfg.env.kind == EnvKind::Tabular) {
      cfg.env.horizon = 3;
      cfg.env.gamma = 0.9;
    }
    cfg.env.horizon = get_or(e, "horizon", cfg.env.horizon);
    cfg.env.gamma = get_or(e, "gamma", cfg.env.gamma);
    cfg.env.landmark.arena_half_width = get_or(e, "arena_half_width", 1.0);
    cfg.env.landmark.step_size = get_or(e, "step_size", 0.1);
    const auto placement = get_or<std::string>(e, "landmark", "uniform");
    if (placement == "uniform") cfg.env.landmark.placement = LandmarkPlacement::UniformPerEpisode;
    else if (placement == "fixed") cfg.env.landmark.placement = LandmarkPlacement::FixedAtOrigin;
    else throw ConfigError("env.landmark must be 'uniform' or 'fixed'");
    cfg.env.tabular_file = get_or<std::string>(e, "file", "");
    cfg.env.tabular_seed = get_or<std::uint64_t>(e, "seed", kOracleMdpSeed);
    cfg.env.tabular_states = get_or(e, "n_states", 3);
    cfg.env.tabular_actions = get_or(e, "n_actions", 2);
  }
  cfg.policy.kind = tabular_default ? PolicyKind::TabularSoftmax : PolicyKind::MlpSoftmax;
  if (j.contains("policy")) {
    const auto kind = get_or<std::string>(j["policy"], "kind", tabular_default ? "tabular" : "mlp");
    if (kind == "mlp") cfg.policy.kind = PolicyKind::MlpSoftmax;
    else if (kind == "tabular") cfg.policy.kind = PolicyKind::TabularSoftmax;
    else throw ConfigError("policy.kind must be 'mlp' or 'tabular'");
    cfg.policy.hidden_dim = get_or(j["policy"], "hidden_dim", 16);
  }
  if (j.contains("fed")) {
    const json& f = j["fed"];
    cfg.algorithm = get_or(f, "algorithm", 2);
    cfg.N = get_or(f, "N", cfg.N);
    cfg.M = get_or(f, "M", cfg.M);
    cfg.K = get_or(f, "K", cfg.K);
    if (f.contains("alpha")) cfg.alpha = parse_step(f["alpha"]);
    if (f.contains("channel")) cfg.channel = parse_channel(f["channel"]);
    if (f.contains("noise_db")) cfg.noise_var = std::pow(10.0, get_or(f, "noise_db", -60.0) / 10.0);
    cfg.noise_var = get_or(f, "noise_var", cfg.noise_var);
    cfg.seed = get_or<std::uint64_t>(f, "seed", cfg.seed);
    cfg.rescale_by_mh = get_or(f, "rescale_by_mh", false);
  }
  if (tabular_default) cfg.eval = {10, 1};
  if (j.contains("eval")) {
    cfg.eval.m_eval = get_or(j["eval"], "M_eval", cfg.eval.m_eval);
    cfg.eval.eval_every = get_or(j["eval"], "eval_every", cfg.eval.eval_every);
  }
  cfg.replicates = get_or(j, "replicates", cfg.replicates);
  cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir.string());
  cfg.jobs = get_or(j, "jobs", cfg.jobs);
  cfg.record_wallclock = get_or(j, "record_wallclock", false);
  if (j.contains("constants")) {
    if (j["constants"].contains("G")) cfg.G = j["constants"]["G"].get<double>();
    if (j["constants"].contains("F")) cfg.F = j["constants"]["F"].get<double>();
  }
  const auto gap = get_or<std::string>(j, "gap", "oracle");
  if (gap == "oracle") cfg.gap = GapMode::Oracle;
  else if (gap == "loose") cfg.gap = GapMode::Loose;
  else throw ConfigError("gap must be 'oracle' or 'loose'");
  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (g.contains("N")) cfg.grid_N = g["N"].get<std::vector<int>>();
    if (g.contains("M")) cfg.grid_M = g["M"].get<std::vector<int>>();
    if (g.contains("channel"))
      for (const auto& c : g["channel"]) cfg.grid_channel.push_back(parse_channel(c));
    if (g.contains("alpha"))
      for (const auto& a : g["alpha"]) cfg.grid_alpha.push_back(parse_step(a));
  }
  cfg.validate();
  return cfg;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  std::string pointer = "/" + key;
  std::replace(pointer.begin(), pointer.end(), '.', '/');
  try {
    j[json::json_pointer(pointer)] = value;
  } catch (const json::exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.what());
  }
}

ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  for (const auto& o : overrides) apply_override(j, o);
  try {
    ExperimentConfig cfg = parse_config(j);
    // MDP files are resolved relative to the config that names them
    if (!cfg.env.tabular_file.empty() && fs::path(cfg.env.tabular_file).is_relative())
      cfg.env.tabular_file = (path.parent_path() / cfg.env.tabular_file).string();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::unique_ptr<Environment> make_environment(const EnvSpec& spec) {
  try {
    if (spec.kind == EnvKind::Landmark) {
      LandmarkParams p = spec.landmark;
      p.horizon = spec.horizon;
      p.gamma = spec.gamma;
      return std::make_unique<LandmarkWorld>(p);
    }
    if (!spec.tabular_file.empty()) return std::make_unique<TabularMdp>(load_tabular_mdp(spec.tabular_file));
    return std::make_unique<TabularMdp>(make_random_tabular_mdp(
        spec.tabular_seed, static_cast<std::size_t>(spec.tabular_states),
        static_cast<std::size_t>(spec.tabular_actions), spec.horizon, spec.gamma));
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("env: ") + e.what());
  }
}

std::unique_ptr<Policy> make_policy_for(const PolicySpec& spec, const Environment& env) {
  if (spec.kind == PolicyKind::MlpSoftmax)
    return std::make_unique<MlpSoftmaxPolicy>(env.state_dim(), static_cast<std::size_t>(spec.hidden_dim),
                                              env.n_actions());
  const auto* tab = dynamic_cast<const TabularMdp*>(&env);
  if (!tab) throw ConfigError("policy.kind 'tabular' needs a tabular environment");
  return std::make_unique<TabularSoftmaxPolicy>(tab->n_states(), tab->n_actions());
}

// ---------------------------------------------------------------- grid

std::string GridPoint::stem() const {
  return fmt::format("N{}_M{}_{}_a{:g}", N, M, channel.label(), alpha);
}

std::vector<GridPoint> expand_grid(const ExperimentConfig& cfg, const ProblemConstants* constants) {
  const std::vector<int> Ns = cfg.grid_N.empty() ? std::vector<int>{cfg.N} : cfg.grid_N;
  const std::vector<int> Ms = cfg.grid_M.empty() ? std::vector<int>{cfg.M} : cfg.grid_M;
  const std::vector<ChannelModel> chans =
      cfg.grid_channel.empty() ? std::vector<ChannelModel>{cfg.channel} : cfg.grid_channel;
  const std::vector<StepSize> alphas = cfg.grid_alpha.empty() ? std::vector<StepSize>{cfg.alpha} : cfg.grid_alpha;
  std::vector<GridPoint> out;
  for (const auto& ch : chans)
    for (const auto& a : alphas)
      for (int n : Ns)
        for (int m : Ms) {
          double alpha = a.value;
          if (a.use_max) {
            if (!constants)
              throw ConfigError("alpha = \"max\" needs score bounds G and F (tabular policy or constants.G/F)");
            alpha = max_stepsize(*constants, ch.mean_gain());
          } else if (alpha == 0.0) {
            alpha = ch.kind() == ChannelKind::NakagamiM ? 1e-3 : 1e-4;
          }
          out.push_back({n, m, ch, alpha});
        }
  return out;
}

std::uint64_t replicate_seed(std::uint64_t seed, int replicate) {
  return hash_combine(hash_combine(seed, stream_tag::kReplicate), static_cast<std::uint64_t>(replicate));
}

FedConfig fed_config_for(const ExperimentConfig& cfg, const GridPoint& gp, int replicate) {
  FedConfig f;
  f.N = gp.N;
  f.M = gp.M;
  f.K = cfg.K;
  f.alpha = gp.alpha;
  f.channel = gp.channel;
  f.noise_var = cfg.noise_var;
  f.seed = replicate_seed(cfg.seed, replicate);
  f.rescale_by_mh = cfg.rescale_by_mh;
  f.eval = cfg.eval;
  f.replicate = replicate;
  f.record_wallclock = cfg.record_wallclock;
  return f;
}

ParamVector initial_params_for(const Policy& policy, std::uint64_t rep_seed) {
  RngStream init = RngStream(rep_seed, 0).fork(stream_tag::kInit);
  return policy.initial_params(init);
}

std::optional<ProblemConstants> problem_constants(const ExperimentConfig& cfg, const Environment& env,
                                                  const Policy& policy) {
  const auto sb = policy.score_bound_constants();
  const auto G = sb.G ? sb.G : cfg.G;
  const auto F = sb.F ? sb.F : cfg.F;
  if (!G || !F || !(env.loss_bound() > 0.0)) return std::nullopt;
  return ProblemConstants{*G, *F, env.loss_bound(), env.discount()};
}

// ---------------------------------------------------------------- CSV

std::string format_round_row(const RoundRecord& r) {
  return fmt::format("{},{},{},{},{},{},{}", r.replicate, r.k, r.cum_reward_eval, r.grad_norm_sq_unbiased,
                     r.grad_norm_sq_naive, r.theta_norm, r.wallclock_ms);
}

namespace {

double parse_finite(const std::string& tok, const fs::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DataError(fmt::format("{}:{}: '{}' is not a finite number", path.string(), line, tok));
  }
}

}  // namespace

std::vector<RoundRecord> read_round_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRoundCsvHeader)
    throw DataError(path.string() + ": header does not match the round-record schema");
  std::vector<RoundRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7)
      throw DataError(fmt::format("{}:{}: expected 7 columns, found {}", path.string(), lineno, cells.size()));
    RoundRecord r;
    r.replicate = static_cast<int>(parse_finite(cells[0], path, lineno));
    r.k = static_cast<int>(parse_finite(cells[1], path, lineno));
    r.cum_reward_eval = parse_finite(cells[2], path, lineno);
    r.grad_norm_sq_unbiased = parse_finite(cells[3], path, lineno);
    r.grad_norm_sq_naive = parse_finite(cells[4], path, lineno);
    r.theta_norm = parse_finite(cells[5], path, lineno);
    r.wallclock_ms = static_cast<std::int64_t>(parse_finite(cells[6], path, lineno));
    out.push_back(r);
  }
  return out;
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : "NA"; }

}  // namespace

void parallel_for(int count, int jobs, const std::function<void(int)>& task) {
  const int workers = std::max(1, std::min(jobs, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------- run

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto env = make_environment(cfg.env);
  const auto policy = make_policy_for(cfg.policy, *env);
  const auto constants = problem_constants(cfg, *env, *policy);
  const auto grid = expand_grid(cfg, constants ? &*constants : nullptr);

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir))
    throw ConfigError("output_dir " + cfg.output_dir.string() + " is not writable");

  const int R = cfg.replicates;
  std::vector<std::vector<RoundRecord>> records(grid.size() * static_cast<std::size_t>(R));
  parallel_for(static_cast<int>(records.size()), cfg.jobs, [&](int task) {
    const auto& gp = grid[static_cast<std::size_t>(task / R)];
    const int r = task % R;
    const FedConfig fed = fed_config_for(cfg, gp, r);
    const ParamVector theta0 = initial_params_for(*policy, fed.seed);
    auto run = cfg.algorithm == 1 ? run_algorithm1(*env, *policy, theta0, fed)
                                  : run_algorithm2(*env, *policy, theta0, fed);
    records[static_cast<std::size_t>(task)] = std::move(run.records);
  });

  const auto* tab = dynamic_cast<const TabularMdp*>(env.get());
  ExperimentResult result;
  auto summary = open_out(cfg.output_dir / "summary.csv");
  fmt::print(summary,
             "file,N,M,channel,alpha,replicates,final_reward_mean,final_reward_std,"
             "time_avg_grad_norm_sq_mean,time_avg_grad_norm_sq_std\n");
  auto bounds = open_out(cfg.output_dir / "bounds.csv");
  fmt::print(bounds,
             "file,N,M,K,channel,alpha,m_h,sigma_h2,sigma2,G,F,lbar,gamma,gap,L,V,Lambda,"
             "channel_condition,stepsize_condition,theorem1_rhs,theorem2_rhs\n");

  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& gp = grid[g];
    GridSummary s;
    s.point = gp;
    s.replicates = R;
    s.csv = cfg.output_dir / (gp.stem() + ".csv");
    auto out = open_out(s.csv);
    fmt::print(out, "{}\n", kRoundCsvHeader);
    std::vector<double> finals, avgs;
    for (int r = 0; r < R; ++r) {
      const auto& recs = records[g * static_cast<std::size_t>(R) + static_cast<std::size_t>(r)];
      for (const auto& rec : recs) fmt::print(out, "{}\n", format_round_row(rec));
      if (!recs.empty()) {
        finals.push_back(recs.back().cum_reward_eval);
        double sum = 0.0;
        for (const auto& rec : recs) sum += rec.grad_norm_sq_unbiased;
        avgs.push_back(sum / static_cast<double>(recs.size()));
      }
    }
    const auto fs_ = mean_std(finals);
    const auto as = mean_std(avgs);
    s.final_reward_mean = fs_.mean;
    s.final_reward_std = fs_.std;
    s.time_avg_grad_norm_sq_mean = as.mean;
    s.time_avg_grad_norm_sq_std = as.std;
    fmt::print(summary, "{},{},{},{},{},{},{},{},{},{}\n", s.csv.filename().string(), gp.N, gp.M,
               gp.channel.label(), gp.alpha, R, s.final_reward_mean, s.final_reward_std,
               s.time_avg_grad_norm_sq_mean, s.time_avg_grad_norm_sq_std);

    // Bound report row.
    std::optional<double> L, V, lambda, rhs1, rhs2, gap;
    bool chan_ok = check_channel_condition(gp.N, gp.channel.mean_gain(), gp.channel.var_gain());
    std::optional<bool> step_ok;
    lambda = lambda_NM(gp.N, gp.M, gp.channel.mean_gain(), gp.channel.var_gain());
    if (constants) {
      L = smoothness_L(*constants);
      V = variance_V(*constants);
      gap = constants->lbar / (1.0 - constants->gamma);
      if (cfg.gap == GapMode::Oracle && tab && cfg.policy.kind == PolicyKind::TabularSoftmax) {
        const ParamVector theta0 = initial_params_for(*policy, replicate_seed(cfg.seed, 0));
        gap = std::max(0.0, exact_objective(*tab, *policy, theta0) - optimal_loss_lower_bound(*tab));
      }
      step_ok = check_stepsize(gp.alpha, *constants, gp.channel.mean_gain());
      BoundInputs b{*constants, gp.channel.mean_gain(), gp.channel.var_gain(), cfg.noise_var, gp.N, gp.M,
                    cfg.K, gp.alpha, *gap};
      if (*step_ok) {
        rhs2 = theorem2_rhs(b);
        if (chan_ok) rhs1 = theorem1_rhs(b);
      }
    }
    fmt::print(bounds, "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
               s.csv.filename().string(), gp.N, gp.M, cfg.K, gp.channel.label(), gp.alpha,
               gp.channel.mean_gain(), gp.channel.var_gain(), cfg.noise_var,
               constants ? fmt::format("{}", constants->G) : "NA",
               constants ? fmt::format("{}", constants->F) : "NA", env->loss_bound(), env->discount(),
               fmt_opt(gap), fmt_opt(L), fmt_opt(V), fmt_opt(lambda), chan_ok ? 1 : 0,
               step_ok ? (*step_ok ? "1" : "0") : "NA", fmt_opt(rhs1), fmt_opt(rhs2));
    result.summaries.push_back(std::move(s));
  }
  return result;
}

// ---------------------------------------------------------------- plot data

std::vector<fs::path> emit_plot_data(const fs::path& csv_dir) {
  if (!fs::is_directory(csv_dir)) throw DataError("no such directory " + csv_dir.string());
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(csv_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && entry.path().extension() == ".csv" && name.size() > 1 && name[0] == 'N' &&
        name.find("_M") != std::string::npos)
      inputs.push_back(entry.path());
  }
  if (inputs.empty()) throw DataError("no round CSV files (N*_M*_*.csv) in " + csv_dir.string());
  std::sort(inputs.begin(), inputs.end());

  const fs::path plot_dir = csv_dir / "plot";
  fs::create_directories(plot_dir);
  std::vector<fs::path> written;
  for (const auto& path : inputs) {
    const auto recs = read_round_csv(path);
    if (recs.empty()) throw DataError(path.string() + ": no data rows");
    std::map<int, std::vector<double>> reward_by_k, running_by_k;
    std::map<int, std::pair<double, int>> running;  // replicate -> (sum, count)
    std::vector<RoundRecord> sorted = recs;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.replicate != b.replicate ? a.replicate < b.replicate : a.k < b.k;
    });
    for (const auto& r : sorted) {
      reward_by_k[r.k].push_back(r.cum_reward_eval);
      auto& [sum, n] = running[r.replicate];
      sum += r.grad_norm_sq_unbiased;
      ++n;
      running_by_k[r.k].push_back(sum / n);
    }
    const std::string stem = path.stem().string();
    auto write_band = [&](const std::string& suffix, const std::map<int, std::vector<double>>& by_k) {
      const fs::path out_path = plot_dir / (stem + suffix);
      auto out = open_out(out_path);
      fmt::print(out, "k,mean,std,lower,upper,n\n");
      for (const auto& [k, xs] : by_k) {
        const auto ms = mean_std(xs);
        fmt::print(out, "{},{},{},{},{},{}\n", k, ms.mean, ms.std, ms.mean - ms.std, ms.mean + ms.std, xs.size());
      }
      written.push_back(out_path);
    };
    write_band("_reward.csv", reward_by_k);
    write_band("_gradnorm.csv", running_by_k);
  }
  return written;
}

// ---------------------------------------------------------------- verify

double optimal_loss_lower_bound(const TabularMdp& env) {
  const std::size_t S = env.n_states(), A = env.n_actions();
  Vec value(S, 0.0), next(S);
  for (int t = env.horizon() - 1; t >= 0; --t) {
    for (std::size_t s = 0; s < S; ++s) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < A; ++a) {
        double q = env.loss(s, a);
        for (std::size_t s2 = 0; s2 < S; ++s2) q += env.discount() * env.transition(s, a, s2) * value[s2];
        best = std::min(best, q);
      }
      next[s] = best;
    }
    value = next;
  }
  double j = 0.0;
  for (std::size_t s = 0; s < S; ++s) j += env.initial(s) * value[s];
  return j;
}

double time_averaged_exact_grad_norm_sq(const TabularMdp& env, const Policy& policy, const RunResult& run) {
  const std::size_t K = run.iterates.size() - 1;
  if (K == 0) throw ContractError("time average needs at least one round");
  double sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) sum += norm_sq(exact_gradient(env, policy, run.iterates[k]).vector);
  return sum / static_cast<double>(K);
}

VerifyReport verify_bounds(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.env.kind != EnvKind::Tabular) throw PreconditionError("verify-bounds needs env.kind = tabular");
  if (cfg.policy.kind != PolicyKind::TabularSoftmax)
    throw PreconditionError("verify-bounds needs policy.kind = tabular (analytic G, F)");
  const auto env_ptr = make_environment(cfg.env);
  const auto& env = dynamic_cast<const TabularMdp&>(*env_ptr);
  const auto policy = make_policy_for(cfg.policy, env);
  const auto constants = problem_constants(cfg, env, *policy);
  if (!constants) throw PreconditionError("verify-bounds: score bounds unavailable");
  const auto grid = expand_grid(cfg, &*constants);
  for (const auto& gp : grid)
    if (!check_stepsize(gp.alpha, *constants, gp.channel.mean_gain()))
      throw PreconditionError(fmt::format(
          "stepsize condition alpha <= 1/(m_h L) violated at {}: alpha = {:g} > {:g}; no bound is claimed",
          gp.stem(), gp.alpha, max_stepsize(*constants, gp.channel.mean_gain())));

  const int R = cfg.replicates;
  std::vector<double> averages(grid.size() * static_cast<std::size_t>(R));
  parallel_for(static_cast<int>(averages.size()), cfg.jobs, [&](int task) {
    const auto& gp = grid[static_cast<std::size_t>(task / R)];
    FedConfig fed = fed_config_for(cfg, gp, task % R);
    fed.eval.m_eval = 0;
    const ParamVector theta0 = initial_params_for(*policy, fed.seed);
    const auto run = cfg.algorithm == 1 ? run_algorithm1(env, *policy, theta0, fed)
                                        : run_algorithm2(env, *policy, theta0, fed);
    averages[static_cast<std::size_t>(task)] = time_averaged_exact_grad_norm_sq(env, *policy, run);
  });

  VerifyReport report;
  report.all_pass = true;
  const ParamVector theta0 = initial_params_for(*policy, replicate_seed(cfg.seed, 0));
  double gap = constants->lbar / (1.0 - constants->gamma);
  if (cfg.gap == GapMode::Oracle)
    gap = std::max(0.0, exact_objective(env, *policy, theta0) - optimal_loss_lower_bound(env));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& gp = grid[g];
    VerifyRow row;
    row.point = gp;
    row.K = cfg.K;
    std::vector<double> xs(averages.begin() + static_cast<std::ptrdiff_t>(g * R),
                           averages.begin() + static_cast<std::ptrdiff_t>((g + 1) * R));
    const auto ms = mean_std(xs);
    row.empirical = ms.mean;
    row.empirical_se = ms.std / std::sqrt(static_cast<double>(R));
    row.gap = gap;
    const BoundInputs b{*constants, gp.channel.mean_gain(), gp.channel.var_gain(), cfg.noise_var, gp.N, gp.M,
                        cfg.K, gp.alpha, gap};
    row.channel_condition = check_channel_condition(gp.N, b.m_h, b.var_h);
    row.theorem2 = theorem2_rhs(b);
    row.pass = row.empirical <= row.theorem2;
    if (row.channel_condition) {
      row.theorem1 = theorem1_rhs(b);
      row.pass = row.pass && row.empirical <= *row.theorem1;
    }
    report.all_pass = report.all_pass && row.pass;
    report.rows.push_back(row);
  }
  return report;
}

void print_verify_report(std::ostream& os, const VerifyReport& report) {
  fmt::print(os, "{:<36} {:>6} {:>14} {:>14} {:>14} {:>5}\n", "grid point", "K", "empirical", "theorem1",
             "theorem2", "");
  for (const auto& r : report.rows)
    fmt::print(os, "{:<36} {:>6} {:>14.6g} {:>14} {:>14.6g} {:>5}\n", r.point.stem(), r.K, r.empirical,
               r.theorem1 ? fmt::format("{:.6g}", *r.theorem1) : "n/a", r.theorem2, r.pass ? "PASS" : "FAIL");
  fmt::print(os, "{}\n", report.all_pass ? "ALL PASS" : "BOUND VIOLATED");
}

}  // namespace otapg
