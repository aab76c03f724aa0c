#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "otapg/rng.hpp"
#include "otapg/vec.hpp"

namespace otapg {

// Environment observation. Landmark world: (x, y, x', y'). Tabular: {index}.
using State = Vec;

enum class PolicyKind { MlpSoftmax, TabularSoftmax };

struct ParamShape {
  PolicyKind kind = PolicyKind::TabularSoftmax;
  std::size_t input_dim = 0;   // MLP only
  std::size_t hidden_dim = 0;  // MLP only
  std::size_t n_actions = 0;
  std::size_t n_states = 0;    // tabular only

  static ParamShape mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t n_actions);
  static ParamShape tabular(std::size_t n_states, std::size_t n_actions);

  // Total parameter count d implied by the shape.
  std::size_t size() const;
  bool operator==(const ParamShape&) const = default;
};

// Policy parameters theta in R^d with their layer layout. Values are always
// finite and always match shape.size().
class ParamVector {
 public:
  ParamVector(ParamShape shape, Vec values);
  // All-zero parameters of the given shape.
  explicit ParamVector(ParamShape shape);

  const ParamShape& shape() const { return shape_; }
  std::span<const double> values() const { return values_; }
  const Vec& vec() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  // Copy with coordinate i shifted by delta (finite-difference helper).
  ParamVector perturbed(std::size_t i, double delta) const;

  bool operator==(const ParamVector&) const = default;

 private:
  ParamShape shape_;
  Vec values_;
};

// Versioned text format:
//   otapg-params 1
//   kind mlp|tabular
//   input_dim <n> / hidden_dim <n> / n_actions <n> / n_states <n>
//   values <d>
//   <d lines, shortest round-trip decimal>
void write_params(std::ostream& os, const ParamVector& params);
ParamVector read_params(std::istream& is);

struct ScoreBounds {
  std::optional<double> G;  // sup ||grad log pi||
  std::optional<double> F;  // sup |d^2 log pi / dtheta_i dtheta_j|
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual const ParamShape& shape() const = 0;
  std::size_t param_dim() const { return shape().size(); }
  std::size_t n_actions() const { return shape().n_actions; }

  virtual Vec action_probs(const ParamVector& params, const State& state) const = 0;
  virtual double log_prob(const ParamVector& params, const State& state, int action) const = 0;
  // Exact gradient of log pi(action | state; theta) with respect to theta.
  virtual Vec grad_log_prob(const ParamVector& params, const State& state, int action) const = 0;
  virtual ScoreBounds score_bound_constants() const = 0;
  virtual ParamVector initial_params(RngStream& stream) const = 0;

  // Inverse-CDF sampling on a single uniform draw.
  int sample_action(const ParamVector& params, const State& state, RngStream& stream) const;

  // Samples an action and writes its score into `score`. Same draws as
  // sample_action; implementations may share the forward pass.
  virtual int sample_with_score(const ParamVector& params, const State& state, RngStream& stream,
                                Vec& score) const;

 protected:
  void check_params(const ParamVector& params) const;
};

// Softmax over one logit per (state, action); theta[s * n_actions + a].
class TabularSoftmaxPolicy final : public Policy {
 public:
  TabularSoftmaxPolicy(std::size_t n_states, std::size_t n_actions);

  const ParamShape& shape() const override { return shape_; }
  Vec action_probs(const ParamVector& params, const State& state) const override;
  double log_prob(const ParamVector& params, const State& state, int action) const override;
  Vec grad_log_prob(const ParamVector& params, const State& state, int action) const override;
  // (sqrt(2), 1/4): ||e_a - pi||^2 <= 2 and |Hessian entries| = pi_a|1{a=b} - pi_b| <= 1/4.
  ScoreBounds score_bound_constants() const override;
  // Zero logits (uniform policy); consumes no draws.
  ParamVector initial_params(RngStream& stream) const override;

  std::size_t state_index(const State& state) const;

 private:
  ParamShape shape_;
};

// input -> ReLU(hidden) -> softmax(n_actions). Layout: W1 (hidden x input,
// row-major), b1, W2 (actions x hidden, row-major), b2.
class MlpSoftmaxPolicy final : public Policy {
 public:
  MlpSoftmaxPolicy(std::size_t input_dim, std::size_t hidden_dim, std::size_t n_actions);

  const ParamShape& shape() const override { return shape_; }
  Vec action_probs(const ParamVector& params, const State& state) const override;
  double log_prob(const ParamVector& params, const State& state, int action) const override;
  Vec grad_log_prob(const ParamVector& params, const State& state, int action) const override;
  ScoreBounds score_bound_constants() const override { return {}; }
  // W ~ N(0, 1/fan_in), biases zero.
  ParamVector initial_params(RngStream& stream) const override;
  int sample_with_score(const ParamVector& params, const State& state, RngStream& stream,
                        Vec& score) const override;

  // Hidden pre-activations W1 s + b1 (used to skip ReLU kinks in gradient checks).
  Vec hidden_preactivations(const ParamVector& params, const State& state) const;

 private:
  struct Forward {
    Vec pre;     // W1 s + b1
    Vec hidden;  // ReLU(pre)
    Vec logits;
  };
  Forward forward(const ParamVector& params, const State& state) const;
  void backward(const ParamVector& params, const State& state, const Forward& fw,
                std::span<const double> probs, int action, Vec& grad) const;

  ParamShape shape_;
};

std::unique_ptr<Policy> make_policy(const ParamShape& shape);

// Numerically stable softmax / log-softmax of a logit vector.
Vec softmax(std::span<const double> logits);
double log_softmax_at(std::span<const double> logits, std::size_t index);

}  // namespace otapg
