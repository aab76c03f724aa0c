#include "otapg/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace otapg {
namespace {

constexpr double kSumTol = 1e-12;

void check_distribution(std::span<const double> p, const std::string& what) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ParameterError(what + ": negative or non-finite entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kSumTol)
    throw ParameterError(fmt::format("{}: sums to {:.17g}, expected 1", what, sum));
}

std::size_t sample_index(std::span<const double> p, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  for (std::size_t i = p.size(); i-- > 0;)
    if (p[i] > 0.0) return i;
  return p.size() - 1;
}

void check_action(int action, std::size_t n_actions) {
  if (action < 0 || static_cast<std::size_t>(action) >= n_actions)
    throw ContractError(fmt::format("action {} out of range [0, {})", action, n_actions));
}

}  // namespace

// ---------------------------------------------------------------- landmark

LandmarkWorld::LandmarkWorld(LandmarkParams params) : p_(params) {
  if (!(p_.arena_half_width > 0.0)) throw ParameterError("landmark: arena_half_width must be > 0");
  if (!(p_.step_size > 0.0)) throw ParameterError("landmark: step_size must be > 0");
  if (p_.horizon < 0) throw ParameterError("landmark: horizon must be >= 0");
  if (!(p_.gamma > 0.0 && p_.gamma < 1.0)) throw ParameterError("landmark: gamma must be in (0,1)");
}

double LandmarkWorld::loss_bound() const { return 2.0 * std::sqrt(2.0) * p_.arena_half_width; }

State LandmarkWorld::reset(RngStream& stream) const {
  const double w = p_.arena_half_width;
  State s(4, 0.0);
  s[0] = w * (2.0 * stream.uniform() - 1.0);
  s[1] = w * (2.0 * stream.uniform() - 1.0);
  if (p_.placement == LandmarkPlacement::UniformPerEpisode) {
    s[2] = w * (2.0 * stream.uniform() - 1.0);
    s[3] = w * (2.0 * stream.uniform() - 1.0);
  }
  return s;
}

StepResult LandmarkWorld::step(const State& state, int action, RngStream&) const {
  check_action(action, kActions);
  if (state.size() != 4) throw ContractError("landmark: state must have 4 entries");
  static constexpr double kDx[kActions] = {0.0, -1.0, 1.0, 0.0, 0.0};
  static constexpr double kDy[kActions] = {0.0, 0.0, 0.0, 1.0, -1.0};
  const double w = p_.arena_half_width;
  State next = state;
  next[0] = std::clamp(state[0] + p_.step_size * kDx[action], -w, w);
  next[1] = std::clamp(state[1] + p_.step_size * kDy[action], -w, w);
  const double loss = std::hypot(next[0] - next[2], next[1] - next[3]);
  return {std::move(next), loss};
}

// ---------------------------------------------------------------- tabular

TabularMdp::TabularMdp(std::size_t n_states, std::size_t n_actions, Vec transition, Vec loss,
                       Vec initial, int horizon, double gamma, double loss_bound)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      loss_(std::move(loss)),
      initial_(std::move(initial)),
      horizon_(horizon),
      gamma_(gamma),
      loss_bound_(loss_bound) {
  if (n_states_ == 0 || n_actions_ == 0) throw ParameterError("tabular: empty state or action set");
  if (transition_.size() != n_states_ * n_actions_ * n_states_)
    throw ParameterError("tabular: transition table has wrong size");
  if (loss_.size() != n_states_ * n_actions_) throw ParameterError("tabular: loss table has wrong size");
  if (initial_.size() != n_states_) throw ParameterError("tabular: initial distribution has wrong size");
  if (horizon_ < 0) throw ParameterError("tabular: horizon must be >= 0");
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw ParameterError("tabular: gamma must be in (0,1)");
  for (std::size_t sa = 0; sa < n_states_ * n_actions_; ++sa)
    check_distribution(std::span(transition_).subspan(sa * n_states_, n_states_),
                       fmt::format("tabular: P[{}][{}]", sa / n_actions_, sa % n_actions_));
  check_distribution(initial_, "tabular: initial distribution");
  const double max_loss = *std::max_element(loss_.begin(), loss_.end());
  if (loss_bound_ <= 0.0) loss_bound_ = max_loss;
  for (double l : loss_)
    if (!(l >= 0.0) || l > loss_bound_)
      throw ParameterError(fmt::format("tabular: loss {} outside [0, {}]", l, loss_bound_));
}

std::size_t TabularMdp::index_of(const State& state) const {
  if (state.size() != 1 || !(state[0] >= 0.0) || state[0] >= static_cast<double>(n_states_))
    throw ContractError("tabular: invalid state");
  return static_cast<std::size_t>(state[0]);
}

State TabularMdp::reset(RngStream& stream) const {
  return {static_cast<double>(sample_index(initial_, stream.uniform()))};
}

StepResult TabularMdp::step(const State& state, int action, RngStream& stream) const {
  check_action(action, n_actions_);
  const std::size_t s = index_of(state);
  const auto a = static_cast<std::size_t>(action);
  const auto row = std::span(transition_).subspan((s * n_actions_ + a) * n_states_, n_states_);
  return {{static_cast<double>(sample_index(row, stream.uniform()))}, loss(s, a)};
}

TabularMdp TabularMdp::with_horizon(int horizon) const {
  return TabularMdp(n_states_, n_actions_, transition_, loss_, initial_, horizon, gamma_, loss_bound_);
}

TabularMdp make_random_tabular_mdp(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                                   int horizon, double gamma) {
  RngStream rng(seed, 0x6d6470);
  Vec transition(n_states * n_actions * n_states);
  for (std::size_t sa = 0; sa < n_states * n_actions; ++sa) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n_states; ++j) sum += (transition[sa * n_states + j] = rng.uniform());
    for (std::size_t j = 0; j < n_states; ++j) transition[sa * n_states + j] /= sum;
  }
  Vec loss(n_states * n_actions);
  for (auto& l : loss) l = rng.uniform();
  Vec initial(n_states, 1.0 / static_cast<double>(n_states));
  return TabularMdp(n_states, n_actions, std::move(transition), std::move(loss), std::move(initial),
                    horizon, gamma, 1.0);
}

TabularMdp default_oracle_mdp() { return make_random_tabular_mdp(kOracleMdpSeed); }

TabularMdp read_tabular_mdp(std::istream& is) {
  std::stringstream clean;
  std::string line;
  while (std::getline(is, line)) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    clean << line << '\n';
  }
  std::map<std::string, Vec> fields;
  std::size_t n_states = 0, n_actions = 0;
  std::string key;
  auto read_numbers = [&](std::size_t count) {
    Vec v(count);
    for (auto& x : v) {
      std::string tok;
      if (!(clean >> tok)) throw ConfigError("mdp file: '" + key + "' is truncated");
      try {
        std::size_t used = 0;
        x = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError("mdp file: bad number '" + tok + "' in '" + key + "'");
      }
    }
    return v;
  };
  while (clean >> key) {
    std::size_t count = 1;
    if (key == "transition") count = n_states * n_actions * n_states;
    else if (key == "loss") count = n_states * n_actions;
    else if (key == "initial") count = n_states;
    else if (key != "n_states" && key != "n_actions" && key != "gamma" && key != "horizon" &&
             key != "loss_bound")
      throw ConfigError("mdp file: unknown key '" + key + "'");
    if (count == 0) throw ConfigError("mdp file: '" + key + "' before n_states/n_actions");
    fields[key] = read_numbers(count);
    if (key == "n_states") n_states = static_cast<std::size_t>(fields[key][0]);
    if (key == "n_actions") n_actions = static_cast<std::size_t>(fields[key][0]);
  }
  for (const char* required : {"n_states", "n_actions", "gamma", "horizon", "transition", "loss", "initial"})
    if (!fields.count(required)) throw ConfigError(std::string("mdp file: missing '") + required + "'");
  const double lbar = fields.count("loss_bound") ? fields["loss_bound"][0] : 0.0;
  try {
    return TabularMdp(n_states, n_actions, fields["transition"], fields["loss"], fields["initial"],
                      static_cast<int>(fields["horizon"][0]), fields["gamma"][0], lbar);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("mdp file: ") + e.what());
  }
}

TabularMdp load_tabular_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mdp file " + path.string());
  return read_tabular_mdp(in);
}

void write_tabular_mdp(std::ostream& os, const TabularMdp& mdp) {
  fmt::print(os, "n_states {}\nn_actions {}\ngamma {}\nhorizon {}\n", mdp.n_states(), mdp.n_actions(),
             mdp.discount(), mdp.horizon());
  fmt::print(os, "transition");
  for (double p : mdp.transition_table()) fmt::print(os, " {}", p);
  fmt::print(os, "\nloss");
  for (double l : mdp.loss_table()) fmt::print(os, " {}", l);
  fmt::print(os, "\ninitial");
  for (double r : mdp.initial_dist()) fmt::print(os, " {}", r);
  fmt::print(os, "\nloss_bound {}\n", mdp.loss_bound());
}

// ---------------------------------------------------------------- rollouts

Trajectory sample_trajectory(const Environment& env, const Policy& policy, const ParamVector& params,
                             RngStream& stream) {
  if (policy.n_actions() != env.n_actions())
    throw ContractError("sample_trajectory: policy and environment disagree on action count");
  const int horizon = env.horizon();
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.actions.reserve(static_cast<std::size_t>(horizon));
  traj.losses.reserve(static_cast<std::size_t>(horizon));
  traj.states.push_back(env.reset(stream));
  for (int t = 0; t < horizon; ++t) {
    const int a = policy.sample_action(params, traj.states.back(), stream);
    auto [next, loss] = env.step(traj.states.back(), a, stream);
    traj.actions.push_back(a);
    traj.losses.push_back(loss);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

double discounted_loss(const Trajectory& traj, double gamma) {
  double total = 0.0, weight = 1.0;
  for (double l : traj.losses) {
    total += weight * l;
    weight *= gamma;
  }
  return total;
}

}  // namespace otapg
