#include <cmath>

#include "doctest.h"
#include "otapg/ota.hpp"
#include "support.hpp"

using namespace otapg;
using namespace otapg::testing;

namespace {

std::vector<GradientEstimate> fixed_estimates(std::initializer_list<Vec> vs) {
  std::vector<GradientEstimate> out;
  int i = 0;
  for (const Vec& v : vs) out.push_back({v, 1, i++});
  return out;
}

FedConfig small_cfg(int N, int M, int K, double alpha, const ChannelModel& ch, double noise) {
  FedConfig c;
  c.N = N;
  c.M = M;
  c.K = K;
  c.alpha = alpha;
  c.channel = ch;
  c.noise_var = noise;
  c.seed = 4242;
  return c;
}

}  // namespace

TEST_SUITE("ota") {

TEST_CASE("aggregate identities") {
  const RngStream root(1, 0);
  const auto one = fixed_estimates({{0.5, -2.0, 3.25}});
  const ReceivedSignal s1 = ota_aggregate(one, ChannelModel::ideal(), 0.0, root, 0);
  CHECK(s1.v == one[0].vector);
  CHECK(s1.gains == Vec{1.0});
  CHECK(s1.noise == Vec{0, 0, 0});

  const auto three = fixed_estimates({{1, 0}, {0, 1}, {2, -3}});
  const ReceivedSignal s3 = ota_aggregate(three, ChannelModel::deterministic(2.0), 0.0, root, 5);
  CHECK(s3.v == Vec{6, -4});
  CHECK(s3.round == 5);

  CHECK_THROWS_AS(ota_aggregate(fixed_estimates({{1, 0}, {1}}), ChannelModel::ideal(), 0.0, root, 0),
                  ContractError);
  CHECK_THROWS_AS(ota_aggregate({}, ChannelModel::ideal(), 0.0, root, 0), ContractError);
}

TEST_CASE("aggregate is linear for replayed draws") {
  const RngStream root(2, 0);
  const auto a = fixed_estimates({{1, 2}, {3, -1}});
  const auto b = fixed_estimates({{-0.5, 4}, {2, 2}});
  auto ab = a;
  for (std::size_t i = 0; i < ab.size(); ++i) axpy(1.0, b[i].vector, ab[i].vector);
  const auto ch = ChannelModel::rayleigh(1.0);
  const ReceivedSignal sa = ota_aggregate(a, ch, 0.3, root, 7);
  const ReceivedSignal sb = ota_aggregate(b, ch, 0.3, root, 7);
  const ReceivedSignal sab = ota_aggregate(ab, ch, 0.3, root, 7);
  CHECK(sa.gains == sab.gains);
  CHECK(sa.noise == sab.noise);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK(sab.v[j] == doctest::Approx(sa.v[j] + sb.v[j] - sa.noise[j]).epsilon(1e-14));
}

TEST_CASE("received signal is centred on m_h times the sum") {
  const auto est = fixed_estimates({{1.0, -0.5}, {0.25, 2.0}});
  const auto ch = ChannelModel::rayleigh(1.0);
  const RngStream root(3, 0);
  RunningVec acc(2);
  for (int r = 0; r < 100000; ++r) acc.add(ota_aggregate(est, ch, 1e-6, root, r).v);
  const Vec expect = {ch.mean_gain() * 1.25, ch.mean_gain() * 1.5};
  for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(acc.c[j].mean - expect[j]) <= 4 * acc.c[j].se());
}

TEST_CASE("update rules") {
  const ParamShape sh = ParamShape::tabular(1, 2);
  const ParamVector zero(sh);
  ReceivedSignal sig;
  sig.v = {0, 0};
  const ParamVector th(sh, {0.3, -0.7});
  CHECK(server_update(th, sig, 0.5, 3) == th);
  sig.v = {2, -4};
  const ParamVector next = server_update(zero, sig, 0.1, 2);
  CHECK(next[0] == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(next[1] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK_THROWS_AS(server_update(zero, sig, 0.0, 2), ParameterError);
  CHECK_THROWS_AS(server_update(zero, sig, 0.1, 0), ParameterError);
  sig.v = {1, 2, 3};
  CHECK_THROWS_AS(server_update(zero, sig, 0.1, 1), ContractError);

  const auto single = fixed_estimates({{1.0, -1.0}});
  const ParamVector b1 = baseline_update(th, single, 0.25);
  CHECK(b1[0] == 0.3 - 0.25);
  CHECK(b1[1] == -0.7 + 0.25);
  const auto same = fixed_estimates({{0.5, 1.5}, {0.5, 1.5}, {0.5, 1.5}, {0.5, 1.5}});
  const ParamVector b4 = baseline_update(th, same, 0.2);
  CHECK(b4[0] == doctest::Approx(0.3 - 0.2 * 0.5).epsilon(1e-15));
  CHECK(b4[1] == doctest::Approx(-0.7 - 0.2 * 1.5).epsilon(1e-15));
  CHECK_THROWS_AS(baseline_update(th, {}, 0.2), ContractError);
}

TEST_CASE("config validation") {
  FedConfig c = small_cfg(1, 1, 1, 0.1, ChannelModel::ideal(), 0.0);
  CHECK_NOTHROW(c.validate());
  auto bad = [&](auto mutate) {
    FedConfig x = c;
    mutate(x);
    CHECK_THROWS_AS(x.validate(), ParameterError);
  };
  bad([](FedConfig& x) { x.N = 0; });
  bad([](FedConfig& x) { x.M = 0; });
  bad([](FedConfig& x) { x.K = 0; });
  bad([](FedConfig& x) { x.alpha = 0; });
  bad([](FedConfig& x) { x.noise_var = -1; });
  bad([](FedConfig& x) { x.eval.m_eval = 3; });
  bad([](FedConfig& x) {
    x.eval.m_eval = 2;
    x.eval.eval_every = 0;
  });
}

TEST_CASE("zero-loss run leaves theta unchanged") {
  TabularSoftmaxPolicy pol(1, 2);
  const ParamVector th(pol.shape(), {0.1, 0.2});
  const RunResult r = run_algorithm1(constant_chain(0.0, 3, 0.9), pol, th,
                                     small_cfg(1, 1, 1, 0.1, ChannelModel::ideal(), 0.0));
  REQUIRE(r.iterates.size() == 2);
  CHECK(r.iterates[1] == th);
  CHECK(r.records.empty());
}

TEST_CASE("ideal noiseless over-the-air run equals the baseline bit for bit") {
  const TabularMdp mdp = default_oracle_mdp();
  TabularSoftmaxPolicy pol(3, 2);
  const ParamVector th(pol.shape(), kOracleTheta);
  FedConfig c = small_cfg(4, 5, 50, 0.3, ChannelModel::ideal(), 0.0);
  c.eval = {4, 5};
  const RunResult a1 = run_algorithm1(mdp, pol, th, c);
  const RunResult a2 = run_algorithm2(mdp, pol, th, c);
  CHECK(a1.iterates == a2.iterates);
  CHECK(a1.iterates.size() == 51);
  CHECK(a1.iterates.front() != a1.iterates.back());
  REQUIRE(a1.records.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(a1.records[i].k == static_cast<int>(5 * i));
    CHECK(a1.records[i].cum_reward_eval == a2.records[i].cum_reward_eval);
    CHECK(a1.records[i].wallclock_ms == 0);
  }
}

TEST_CASE("deterministic gain scales the stepsize") {
  const TabularMdp mdp = default_oracle_mdp();
  TabularSoftmaxPolicy pol(3, 2);
  const ParamVector th(pol.shape(), kOracleTheta);
  // Power-of-two gains commute exactly with the rounding; others to rounding error.
  const RunResult ota2 = run_algorithm2(mdp, pol, th, small_cfg(3, 4, 30, 0.1, ChannelModel::deterministic(2.0), 0.0));
  const RunResult base2 = run_algorithm1(mdp, pol, th, small_cfg(3, 4, 30, 0.2, ChannelModel::ideal(), 0.0));
  CHECK(ota2.iterates == base2.iterates);

  const RunResult ota3 = run_algorithm2(mdp, pol, th, small_cfg(3, 4, 30, 0.1, ChannelModel::deterministic(3.0), 0.0));
  const RunResult base3 = run_algorithm1(mdp, pol, th, small_cfg(3, 4, 30, 0.1 * 3.0, ChannelModel::ideal(), 0.0));
  for (std::size_t k = 0; k < ota3.iterates.size(); ++k)
    for (std::size_t j = 0; j < 6; ++j) REQUIRE(ota3.iterates[k][j] == doctest::Approx(base3.iterates[k][j]).epsilon(1e-12));

  FedConfig resc = small_cfg(3, 4, 30, 0.2, ChannelModel::deterministic(2.0), 0.0);
  resc.rescale_by_mh = true;
  const RunResult r = run_algorithm2(mdp, pol, th, resc);
  CHECK(r.iterates == base2.iterates);
}

TEST_CASE("runs are reproducible and seed-sensitive") {
  const TabularMdp mdp = default_oracle_mdp();
  TabularSoftmaxPolicy pol(3, 2);
  const ParamVector th(pol.shape());
  FedConfig c = small_cfg(2, 3, 20, 0.5, ChannelModel::rayleigh(1.0), 1e-6);
  c.eval = {2, 1};
  const RunResult a = run_algorithm2(mdp, pol, th, c);
  const RunResult b = run_algorithm2(mdp, pol, th, c);
  CHECK(a.iterates == b.iterates);
  CHECK(a.records.size() == 20);
  c.seed += 1;
  CHECK(run_algorithm2(mdp, pol, th, c).iterates != a.iterates);
}

TEST_CASE("substreams are distinct") {
  const RngStream root(5, 0);
  CHECK(agent_stream(root, 1, 2).stream_id() != agent_stream(root, 2, 1).stream_id());
  CHECK(agent_stream(root, 0, 0).stream_id() != channel_stream(root, 0, 0).stream_id());
  CHECK(noise_stream(root, 3).stream_id() != eval_stream(root, 3).stream_id());
  CHECK(agent_stream(root, 0, 0).stream_id() == agent_stream(RngStream(5, 0), 0, 0).stream_id());
}

}  // TEST_SUITE
