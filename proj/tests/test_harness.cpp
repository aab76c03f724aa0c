#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "otapg/harness.hpp"
#include "otapg/pg.hpp"
#include "support.hpp"

using namespace otapg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("otapg_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig tiny_tabular(const fs::path& out) {
  ExperimentConfig cfg = parse_config(json::parse(R"({
    "env": {"kind": "tabular"},
    "fed": {"N": 2, "M": 3, "K": 6, "alpha": 0.5, "channel": "rayleigh", "seed": 3},
    "eval": {"M_eval": 4, "eval_every": 2},
    "replicates": 3
  })"));
  cfg.output_dir = out;
  return cfg;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config defaults") {
  const ExperimentConfig d = parse_config(json::object());
  CHECK(d.env.kind == EnvKind::Landmark);
  CHECK(d.env.horizon == 20);
  CHECK(d.env.gamma == 0.99);
  CHECK(d.policy.kind == PolicyKind::MlpSoftmax);
  CHECK(d.policy.hidden_dim == 16);
  CHECK(d.algorithm == 2);
  CHECK(d.noise_var == 1e-6);
  CHECK(d.replicates == 20);
  CHECK(d.channel.kind() == ChannelKind::Rayleigh);
  CHECK(d.eval.m_eval == 10);
  CHECK(d.eval.eval_every == 10);

  const ExperimentConfig t = parse_config(json::parse(R"({"env": {"kind": "tabular"}})"));
  CHECK(t.env.horizon == 3);
  CHECK(t.env.gamma == 0.9);
  CHECK(t.policy.kind == PolicyKind::TabularSoftmax);
  CHECK(t.eval.eval_every == 1);
}

TEST_CASE("config fields") {
  const ExperimentConfig c = parse_config(json::parse(R"({
    "env": {"kind": "landmark", "horizon": 7, "gamma": 0.5, "landmark": "fixed", "step_size": 0.2},
    "policy": {"hidden_dim": 4},
    "fed": {"algorithm": 1, "N": 3, "M": 2, "K": 9, "alpha": "max",
            "channel": {"kind": "nakagami", "m": 0.5, "omega": 2}, "noise_db": -30, "seed": 77},
    "constants": {"G": 3, "F": 1},
    "gap": "loose",
    "grid": {"N": [1, 2], "M": [4], "channel": ["ideal", {"kind": "moments", "mean": 1, "var": 10}],
             "alpha": [0.1, "max"]}
  })"));
  CHECK(c.env.horizon == 7);
  CHECK(c.env.landmark.placement == LandmarkPlacement::FixedAtOrigin);
  CHECK(c.env.landmark.step_size == 0.2);
  CHECK(c.policy.hidden_dim == 4);
  CHECK(c.algorithm == 1);
  CHECK(c.alpha.use_max);
  CHECK(c.channel.kind() == ChannelKind::NakagamiM);
  CHECK(c.channel.param2() == 2.0);
  CHECK(c.noise_var == doctest::Approx(1e-3));
  CHECK(c.seed == 77);
  CHECK(*c.G == 3.0);
  CHECK(c.gap == GapMode::Loose);
  CHECK(c.grid_N == std::vector<int>{1, 2});
  CHECK(c.grid_channel.size() == 2);
  CHECK(c.grid_alpha.size() == 2);

  CHECK(parse_config(json::parse(R"({"fed": {"noise_db": -60}})")).noise_var == doctest::Approx(1e-6));
}

TEST_CASE("config errors") {
  auto bad = [](const char* text) { CHECK_THROWS_AS(parse_config(json::parse(text)), ConfigError); };
  bad(R"({"env": {"kind": "maze"}})");
  bad(R"({"policy": {"kind": "linear"}})");
  bad(R"({"fed": {"algorithm": 3}})");
  bad(R"({"fed": {"N": 0}})");
  bad(R"({"fed": {"alpha": "huge"}})");
  bad(R"({"fed": {"alpha": -1}})");
  bad(R"({"fed": {"channel": "foggy"}})");
  bad(R"({"fed": {"channel": {"kind": "nakagami", "m": -1}}})");
  bad(R"({"fed": {"channel": {"kind": "deterministic"}}})");
  bad(R"({"fed": {"noise_var": -1}})");
  bad(R"({"fed": {"K": "many"}})");
  bad(R"({"eval": {"M_eval": 3}})");
  bad(R"({"replicates": 0})");
  bad(R"({"gap": "tight"})");
  bad(R"({"env": {"gamma": 1.0}})");
  bad(R"({"grid": {"alpha": [0]}})");
}

TEST_CASE("load_config with comments and overrides") {
  const fs::path dir = scratch_dir("load");
  const fs::path path = dir / "c.json";
  std::ofstream(path) << "// experiment\n{\"fed\": {\"N\": 2, /* agents */ \"K\": 5}}\n";
  const ExperimentConfig c = load_config(path, {"fed.M=7", "fed.channel=ideal", "env.kind=\"tabular\"",
                                                "grid.N=[1,4]"});
  CHECK(c.N == 2);
  CHECK(c.M == 7);
  CHECK(c.K == 5);
  CHECK(c.channel.kind() == ChannelKind::Ideal);
  CHECK(c.env.kind == EnvKind::Tabular);
  CHECK(c.grid_N == std::vector<int>{1, 4});

  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
  std::ofstream(dir / "broken.json") << "{\"fed\": ";
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(load_config(path, {"noequals"}), ConfigError);
  CHECK_THROWS_AS(load_config(path, {"fed.N=-3"}), ConfigError);

  json j = json::object();
  apply_override(j, "a.b=1.5");
  apply_override(j, "a.c=text");
  CHECK(j["a"]["b"] == 1.5);
  CHECK(j["a"]["c"] == "text");
}

TEST_CASE("environment and policy factories") {
  EnvSpec tab;
  tab.kind = EnvKind::Tabular;
  tab.horizon = 3;
  tab.gamma = 0.9;
  const auto env = make_environment(tab);
  const auto* mdp = dynamic_cast<const TabularMdp*>(env.get());
  REQUIRE(mdp);
  CHECK(mdp->loss_table() == default_oracle_mdp().loss_table());
  CHECK(make_policy_for({PolicyKind::TabularSoftmax, 16}, *env)->param_dim() == 6);
  CHECK(make_policy_for({PolicyKind::MlpSoftmax, 8}, *env)->param_dim() == 8 + 8 + 16 + 2);

  const auto lw = make_environment(EnvSpec{});
  CHECK(lw->horizon() == 20);
  CHECK_THROWS_AS(make_policy_for({PolicyKind::TabularSoftmax, 16}, *lw), ConfigError);

  const fs::path dir = scratch_dir("factory");
  {
    std::ofstream out(dir / "m.txt");
    write_tabular_mdp(out, default_oracle_mdp().with_horizon(2));
  }
  tab.tabular_file = (dir / "m.txt").string();
  CHECK(make_environment(tab)->horizon() == 2);
  tab.tabular_file = (dir / "nope.txt").string();
  CHECK_THROWS_AS(make_environment(tab), ConfigError);
}

TEST_CASE("grid expansion and naming") {
  ExperimentConfig c = parse_config(json::parse(R"({
    "grid": {"N": [1, 2], "M": [5, 10], "channel": ["rayleigh", "nakagami"]}})"));
  const auto g = expand_grid(c, nullptr);
  REQUIRE(g.size() == 8);
  CHECK(g[0].stem() == "N1_M5_rayleigh1_a0.0001");
  CHECK(g[1].stem() == "N1_M10_rayleigh1_a0.0001");
  CHECK(g[2].N == 2);
  CHECK(g[4].stem() == "N1_M5_nakagami0.1-1_a0.001");

  c.alpha = {true, 0.0};
  c.grid_channel.clear();
  CHECK_THROWS_AS(expand_grid(c, nullptr), ConfigError);
  const ProblemConstants pc{std::sqrt(2.0), 0.25, 1.0, 0.9};
  const auto gm = expand_grid(c, &pc);
  CHECK(gm[0].alpha == max_stepsize(pc, std::sqrt(std::acos(-1.0) / 2)));
}

TEST_CASE("replicate seeds") {
  CHECK(replicate_seed(1, 0) == replicate_seed(1, 0));
  CHECK(replicate_seed(1, 0) != replicate_seed(1, 1));
  CHECK(replicate_seed(1, 0) != replicate_seed(2, 0));
  ExperimentConfig c;
  const GridPoint gp{3, 4, ChannelModel::ideal(), 0.1};
  const FedConfig f = fed_config_for(c, gp, 5);
  CHECK(f.seed == replicate_seed(c.seed, 5));
  CHECK(f.replicate == 5);
  CHECK(f.N == 3);
  CHECK(f.M == 4);
  CHECK(f.alpha == 0.1);
}

TEST_CASE("round csv") {
  RoundRecord r{2, 40, -1.25, 0.001, 0.5, 3.75, 12};
  CHECK(format_round_row(r) == "2,40,-1.25,0.001,0.5,3.75,12");
  const RoundRecord x{0, 1, 1.0 / 3, -2e-17, 1e10, 0.1, 0};
  const fs::path dir = scratch_dir("csv");
  std::ofstream(dir / "ok.csv") << kRoundCsvHeader << "\n" << format_round_row(r) << "\n" << format_round_row(x) << "\n";
  const auto back = read_round_csv(dir / "ok.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].k == 40);
  CHECK(back[1].cum_reward_eval == 1.0 / 3);
  CHECK(back[1].grad_norm_sq_unbiased == -2e-17);

  std::ofstream(dir / "header.csv") << "replicate,k\n1,2\n";
  CHECK_THROWS_AS(read_round_csv(dir / "header.csv"), DataError);
  std::ofstream(dir / "cols.csv") << kRoundCsvHeader << "\n1,2,3\n";
  CHECK_THROWS_AS(read_round_csv(dir / "cols.csv"), DataError);
  std::ofstream(dir / "nan.csv") << kRoundCsvHeader << "\n0,0,nan,0,0,0,0\n";
  CHECK_THROWS_AS(read_round_csv(dir / "nan.csv"), DataError);
  std::ofstream(dir / "text.csv") << kRoundCsvHeader << "\n0,0,abc,0,0,0,0\n";
  CHECK_THROWS_AS(read_round_csv(dir / "text.csv"), DataError);
  CHECK_THROWS_AS(read_round_csv(dir / "missing.csv"), DataError);
}

TEST_CASE("run_experiment row count and determinism") {
  const fs::path dir = scratch_dir("run");
  ExperimentConfig one = tiny_tabular(dir / "one");
  one.replicates = 1;
  one.K = 1;
  one.eval = {2, 1};
  const auto res = run_experiment(one);
  REQUIRE(res.summaries.size() == 1);
  const auto recs = read_round_csv(res.summaries[0].csv);
  CHECK(recs.size() == 1);
  CHECK(recs[0].k == 0);
  CHECK(res.summaries[0].csv.filename() == "N2_M3_rayleigh1_a0.5.csv");

  ExperimentConfig cfg = tiny_tabular(dir / "a");
  run_experiment(cfg);
  cfg.output_dir = dir / "b";
  cfg.jobs = 3;
  run_experiment(cfg);
  for (const char* f : {"N2_M3_rayleigh1_a0.5.csv", "summary.csv", "bounds.csv"}) {
    CAPTURE(f);
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CHECK_FALSE(slurp(dir / "a" / f).empty());
  }
  const auto rows = read_round_csv(dir / "a" / "N2_M3_rayleigh1_a0.5.csv");
  CHECK(rows.size() == 3 * 3);
  for (const auto& r : rows) {
    CHECK(r.k % 2 == 0);
    CHECK(r.k < 6);
    CHECK(r.cum_reward_eval <= 0.0);
    CHECK(r.wallclock_ms == 0);
  }

  // bounds.csv carries the stepsize flag and NA for theorem values when alpha is too large
  const std::string bounds = slurp(dir / "a" / "bounds.csv");
  CHECK(bounds.find(",0,NA,NA\n") != std::string::npos);

  ExperimentConfig bad = tiny_tabular(dir / "a" / "N2_M3_rayleigh1_a0.5.csv" / "sub");
  CHECK_THROWS_AS(run_experiment(bad), ConfigError);
}

TEST_CASE("plot data bands") {
  const fs::path dir = scratch_dir("plot");
  {
    std::ofstream out(dir / "N1_M1_ideal_a0.1.csv");
    out << kRoundCsvHeader << "\n";
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 4; ++k) out << format_round_row({r, k, -2.5, 0.75, 1.0, 0.0, 0}) << "\n";
  }
  {
    std::ofstream out(dir / "N2_M1_ideal_a0.1.csv");
    out << kRoundCsvHeader << "\n";
    for (int k = 0; k < 3; ++k) out << format_round_row({0, k, -1.0 * k, double(k), 1.0, 0.0, 0}) << "\n";
  }
  std::ofstream(dir / "summary.csv") << "file\n";
  const auto written = emit_plot_data(dir);
  CHECK(written.size() == 4);

  const std::string constant = slurp(dir / "plot" / "N1_M1_ideal_a0.1_reward.csv");
  CHECK(constant.rfind("k,mean,std,lower,upper,n\n", 0) == 0);
  CHECK(constant.find("0,-2.5,0,-2.5,-2.5,3\n") != std::string::npos);
  CHECK(slurp(dir / "plot" / "N1_M1_ideal_a0.1_gradnorm.csv").find("3,0.75,0,0.75,0.75,3\n") != std::string::npos);

  // single replicate: zero band; running average of 0, 1, 2
  const std::string single = slurp(dir / "plot" / "N2_M1_ideal_a0.1_gradnorm.csv");
  CHECK(single.find("1,0.5,0,0.5,0.5,1\n") != std::string::npos);
  CHECK(single.find("2,1,0,1,1,1\n") != std::string::npos);

  CHECK_THROWS_AS(emit_plot_data(dir / "nowhere"), DataError);
  const fs::path empty = scratch_dir("plot_empty");
  CHECK_THROWS_AS(emit_plot_data(empty), DataError);
  std::ofstream(empty / "N1_M1_x.csv") << "bad header\n";
  CHECK_THROWS_AS(emit_plot_data(empty), DataError);
}

TEST_CASE("dynamic programming lower bound") {
  const TabularMdp mdp = default_oracle_mdp();
  CHECK(optimal_loss_lower_bound(mdp) == doctest::Approx(otapg::testing::kOracleDpLowerBound).epsilon(1e-13));
  TabularSoftmaxPolicy pol(3, 2);
  RngStream s(4, 4);
  for (int i = 0; i < 200; ++i) {
    const ParamVector th(pol.shape(), draw_gaussian_vector(s, 6, 25.0));
    REQUIRE(exact_objective(mdp, pol, th) >= optimal_loss_lower_bound(mdp) - 1e-12);
  }
  CHECK(optimal_loss_lower_bound(otapg::testing::constant_chain(1.0, 3, 0.5)) == 1.75);
}

TEST_CASE("verify_bounds") {
  ExperimentConfig c = parse_config(json::parse(R"({
    "env": {"kind": "tabular"},
    "fed": {"N": 2, "M": 5, "K": 400, "alpha": "max", "channel": "ideal", "noise_var": 0},
    "replicates": 2})"));
  const VerifyReport ok = verify_bounds(c);
  REQUIRE(ok.rows.size() == 1);
  CHECK(ok.all_pass);
  CHECK(ok.rows[0].theorem1.has_value());
  CHECK(ok.rows[0].empirical <= *ok.rows[0].theorem1);
  CHECK(ok.rows[0].empirical < 0.1);
  CHECK(*ok.rows[0].theorem1 < 10.0);
  CHECK(ok.rows[0].gap == doctest::Approx(otapg::testing::kOracleObjectiveAtZero - otapg::testing::kOracleDpLowerBound));
  std::ostringstream os;
  print_verify_report(os, ok);
  CHECK(os.str().find("ALL PASS") != std::string::npos);

  const ProblemConstants pc{std::sqrt(2.0), 0.25, 1.0, 0.9};
  c.alpha = {false, 10.0 / smoothness_L(pc)};
  CHECK_THROWS_WITH_AS(verify_bounds(c), doctest::Contains("no bound is claimed"), PreconditionError);

  ExperimentConfig land = parse_config(json::object());
  CHECK_THROWS_AS(verify_bounds(land), PreconditionError);
  ExperimentConfig mlp = parse_config(json::parse(R"({"env": {"kind": "tabular"}, "policy": {"kind": "mlp"}})"));
  CHECK_THROWS_AS(verify_bounds(mlp), PreconditionError);
}

TEST_CASE("exact time average") {
  const TabularMdp mdp = default_oracle_mdp();
  TabularSoftmaxPolicy pol(3, 2);
  RunResult run;
  run.iterates = {ParamVector(pol.shape()), ParamVector(pol.shape(), otapg::testing::kOracleTheta),
                  ParamVector(pol.shape())};
  const double expect = (norm_sq(otapg::testing::kOracleGradAtZero) + norm_sq(otapg::testing::kOracleGradAtTheta)) / 2;
  CHECK(time_averaged_exact_grad_norm_sq(mdp, pol, run) == doctest::Approx(expect).epsilon(1e-12));
  run.iterates.erase(run.iterates.begin() + 1, run.iterates.end());
  CHECK_THROWS_AS(time_averaged_exact_grad_norm_sq(mdp, pol, run), ContractError);
}

TEST_CASE("parallel_for") {
  for (int jobs : {1, 2, 5}) {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(37, jobs, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 3, [](int i) {
                    if (i == 7) throw DataError("boom");
                  }),
                  DataError);
  parallel_for(0, 4, [](int) { FAIL("no tasks expected"); });
}

}  // TEST_SUITE
