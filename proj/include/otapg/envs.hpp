#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "otapg/policy.hpp"
#include "otapg/rng.hpp"

namespace otapg {

struct Trajectory {
  std::vector<State> states;  // T + 1
  std::vector<int> actions;   // T
  Vec losses;                 // T, losses[t] = l(s_t, a_t)
};

struct StepResult {
  State next;
  double loss;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual State reset(RngStream& stream) const = 0;
  virtual StepResult step(const State& state, int action, RngStream& stream) const = 0;

  virtual std::size_t state_dim() const = 0;
  virtual std::size_t n_actions() const = 0;
  virtual int horizon() const = 0;
  virtual double discount() const = 0;
  // l-bar: every per-step loss lies in [0, loss_bound()].
  virtual double loss_bound() const = 0;
};

enum class LandmarkPlacement { FixedAtOrigin, UniformPerEpisode };

struct LandmarkParams {
  double arena_half_width = 1.0;
  double step_size = 0.1;
  LandmarkPlacement placement = LandmarkPlacement::UniformPerEpisode;
  int horizon = 20;
  double gamma = 0.99;
};

// Agent at (x, y) seeks a landmark at (x', y') in [-w, w]^2. Actions:
// 0 stay, 1 left, 2 right, 3 up, 4 down; moves are clipped to the arena and
// the step loss is the agent-landmark distance after the move.
class LandmarkWorld final : public Environment {
 public:
  static constexpr std::size_t kActions = 5;

  explicit LandmarkWorld(LandmarkParams params = {});

  State reset(RngStream& stream) const override;
  StepResult step(const State& state, int action, RngStream& stream) const override;

  std::size_t state_dim() const override { return 4; }
  std::size_t n_actions() const override { return kActions; }
  int horizon() const override { return p_.horizon; }
  double discount() const override { return p_.gamma; }
  double loss_bound() const override;
  const LandmarkParams& params() const { return p_; }

 private:
  LandmarkParams p_;
};

// Finite MDP (S, A, P, gamma, rho, l) with a fixed horizon.
class TabularMdp final : public Environment {
 public:
  // transition is row-major [s][a][s'], loss is [s][a]. loss_bound <= 0
  // means "use the largest table entry".
  TabularMdp(std::size_t n_states, std::size_t n_actions, Vec transition, Vec loss, Vec initial,
             int horizon, double gamma, double loss_bound = 0.0);

  State reset(RngStream& stream) const override;
  StepResult step(const State& state, int action, RngStream& stream) const override;

  std::size_t state_dim() const override { return 1; }
  std::size_t n_actions() const override { return n_actions_; }
  int horizon() const override { return horizon_; }
  double discount() const override { return gamma_; }
  double loss_bound() const override { return loss_bound_; }

  std::size_t n_states() const { return n_states_; }
  double transition(std::size_t s, std::size_t a, std::size_t next) const {
    return transition_[(s * n_actions_ + a) * n_states_ + next];
  }
  double loss(std::size_t s, std::size_t a) const { return loss_[s * n_actions_ + a]; }
  double initial(std::size_t s) const { return initial_[s]; }
  const Vec& transition_table() const { return transition_; }
  const Vec& loss_table() const { return loss_; }
  const Vec& initial_dist() const { return initial_; }

  // Same MDP with a different horizon.
  TabularMdp with_horizon(int horizon) const;

 private:
  std::size_t index_of(const State& state) const;

  std::size_t n_states_;
  std::size_t n_actions_;
  Vec transition_;
  Vec loss_;
  Vec initial_;
  int horizon_;
  double gamma_;
  double loss_bound_;
};

// Seeded random MDP: transition rows and rho from normalised uniforms, losses
// uniform in [0, 1) with loss bound 1.
TabularMdp make_random_tabular_mdp(std::uint64_t seed, std::size_t n_states = 3,
                                   std::size_t n_actions = 2, int horizon = 3, double gamma = 0.9);

// The 3-state / 2-action / T=3 / gamma=0.9 MDP used as ground truth in tests.
inline constexpr std::uint64_t kOracleMdpSeed = 20240611;
TabularMdp default_oracle_mdp();

// Text schema, '#' starts a comment, keys in this order:
//   n_states <S>
//   n_actions <A>
//   gamma <g>
//   horizon <T>
//   transition <S*A*S numbers, row-major [s][a][s']>
//   loss <S*A numbers, row-major [s][a]>
//   initial <S numbers>
//   loss_bound <l>        (optional; default max loss entry)
TabularMdp read_tabular_mdp(std::istream& is);
TabularMdp load_tabular_mdp(const std::filesystem::path& path);
void write_tabular_mdp(std::ostream& os, const TabularMdp& mdp);

// Rolls out exactly env.horizon() steps with a_t ~ pi(. | s_t; theta).
Trajectory sample_trajectory(const Environment& env, const Policy& policy, const ParamVector& params,
                             RngStream& stream);

// sum_{t<T} gamma^t losses[t]
double discounted_loss(const Trajectory& traj, double gamma);

}  // namespace otapg
