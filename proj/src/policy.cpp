#include "otapg/policy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace otapg {

ParamShape ParamShape::mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t n_actions) {
  if (input_dim == 0 || hidden_dim == 0 || n_actions == 0)
    throw ParameterError("mlp shape: all dimensions must be >= 1");
  return {PolicyKind::MlpSoftmax, input_dim, hidden_dim, n_actions, 0};
}

ParamShape ParamShape::tabular(std::size_t n_states, std::size_t n_actions) {
  if (n_states == 0 || n_actions == 0)
    throw ParameterError("tabular shape: n_states and n_actions must be >= 1");
  return {PolicyKind::TabularSoftmax, 0, 0, n_actions, n_states};
}

std::size_t ParamShape::size() const {
  if (kind == PolicyKind::TabularSoftmax) return n_states * n_actions;
  return hidden_dim * input_dim + hidden_dim + n_actions * hidden_dim + n_actions;
}

ParamVector::ParamVector(ParamShape shape, Vec values) : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size())
    throw ContractError(fmt::format("ParamVector: {} values for a shape of size {}",
                                    values_.size(), shape_.size()));
  if (!all_finite(values_)) throw NumericError("ParamVector: non-finite parameter value");
}

ParamVector::ParamVector(ParamShape shape) : shape_(shape), values_(shape.size(), 0.0) {}

ParamVector ParamVector::perturbed(std::size_t i, double delta) const {
  Vec v = values_;
  v.at(i) += delta;
  return ParamVector(shape_, std::move(v));
}

void write_params(std::ostream& os, const ParamVector& params) {
  const auto& s = params.shape();
  fmt::print(os, "otapg-params 1\n");
  fmt::print(os, "kind {}\n", s.kind == PolicyKind::MlpSoftmax ? "mlp" : "tabular");
  fmt::print(os, "input_dim {}\nhidden_dim {}\nn_actions {}\nn_states {}\n", s.input_dim,
             s.hidden_dim, s.n_actions, s.n_states);
  fmt::print(os, "values {}\n", params.size());
  for (double v : params.values()) fmt::print(os, "{}\n", v);
}

namespace {

template <typename T>
T read_field(std::istream& is, const std::string& key) {
  std::string got;
  T value{};
  if (!(is >> got) || got != key || !(is >> value))
    throw ConfigError("params file: expected field '" + key + "'");
  return value;
}

}  // namespace

ParamVector read_params(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "otapg-params")
    throw ConfigError("params file: missing 'otapg-params' header");
  if (version != 1) throw ConfigError(fmt::format("params file: unsupported version {}", version));
  const auto kind = read_field<std::string>(is, "kind");
  ParamShape shape;
  shape.input_dim = read_field<std::size_t>(is, "input_dim");
  shape.hidden_dim = read_field<std::size_t>(is, "hidden_dim");
  shape.n_actions = read_field<std::size_t>(is, "n_actions");
  shape.n_states = read_field<std::size_t>(is, "n_states");
  if (kind == "mlp") {
    shape = ParamShape::mlp(shape.input_dim, shape.hidden_dim, shape.n_actions);
  } else if (kind == "tabular") {
    shape = ParamShape::tabular(shape.n_states, shape.n_actions);
  } else {
    throw ConfigError("params file: unknown kind '" + kind + "'");
  }
  const auto d = read_field<std::size_t>(is, "values");
  Vec values(d);
  for (auto& v : values) {
    std::string tok;
    if (!(is >> tok)) throw ConfigError("params file: truncated value list");
    try {
      v = std::stod(tok);
    } catch (const std::exception&) {
      throw ConfigError("params file: bad value '" + tok + "'");
    }
  }
  return ParamVector(shape, std::move(values));
}

Vec softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
  for (auto& x : p) x /= z;
  return p;
}

double log_softmax_at(std::span<const double> logits, std::size_t index) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  return logits[index] - mx - std::log(z);
}

namespace {

// Inverse CDF; a u in the rounding gap above the accumulated mass maps to
// the last action with positive probability.
int pick(std::span<const double> p, double u) {
  double acc = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    acc += p[a];
    if (u < acc) return static_cast<int>(a);
  }
  for (std::size_t a = p.size(); a-- > 0;)
    if (p[a] > 0.0) return static_cast<int>(a);
  return static_cast<int>(p.size() - 1);
}

void check_action(int action, std::size_t n_actions) {
  if (action < 0 || static_cast<std::size_t>(action) >= n_actions)
    throw ContractError(fmt::format("action {} out of range [0, {})", action, n_actions));
}

}  // namespace

int Policy::sample_action(const ParamVector& params, const State& state, RngStream& stream) const {
  const Vec p = action_probs(params, state);
  return pick(p, stream.uniform());
}

int Policy::sample_with_score(const ParamVector& params, const State& state, RngStream& stream,
                              Vec& score) const {
  const int a = sample_action(params, state, stream);
  score = grad_log_prob(params, state, a);
  return a;
}

void Policy::check_params(const ParamVector& params) const {
  if (params.shape() != shape()) throw ContractError("policy: parameter shape mismatch");
}

// ---------------------------------------------------------------- tabular

TabularSoftmaxPolicy::TabularSoftmaxPolicy(std::size_t n_states, std::size_t n_actions)
    : shape_(ParamShape::tabular(n_states, n_actions)) {}

std::size_t TabularSoftmaxPolicy::state_index(const State& state) const {
  if (state.size() != 1) throw ContractError("tabular policy: state must be a single index");
  const double s = state[0];
  if (!(s >= 0.0) || s >= static_cast<double>(shape_.n_states) || s != std::floor(s))
    throw ContractError(fmt::format("tabular policy: state {} out of range", s));
  return static_cast<std::size_t>(s);
}

Vec TabularSoftmaxPolicy::action_probs(const ParamVector& params, const State& state) const {
  check_params(params);
  const std::size_t s = state_index(state);
  return softmax(params.values().subspan(s * shape_.n_actions, shape_.n_actions));
}

double TabularSoftmaxPolicy::log_prob(const ParamVector& params, const State& state,
                                      int action) const {
  check_params(params);
  check_action(action, shape_.n_actions);
  const std::size_t s = state_index(state);
  return log_softmax_at(params.values().subspan(s * shape_.n_actions, shape_.n_actions),
                        static_cast<std::size_t>(action));
}

Vec TabularSoftmaxPolicy::grad_log_prob(const ParamVector& params, const State& state,
                                        int action) const {
  check_action(action, shape_.n_actions);
  const Vec p = action_probs(params, state);
  const std::size_t base = state_index(state) * shape_.n_actions;
  Vec g(shape_.size(), 0.0);
  for (std::size_t b = 0; b < shape_.n_actions; ++b)
    g[base + b] = (static_cast<int>(b) == action ? 1.0 : 0.0) - p[b];
  return g;
}

ScoreBounds TabularSoftmaxPolicy::score_bound_constants() const {
  return {std::sqrt(2.0), 0.25};
}

ParamVector TabularSoftmaxPolicy::initial_params(RngStream&) const { return ParamVector(shape_); }

// ---------------------------------------------------------------- MLP

MlpSoftmaxPolicy::MlpSoftmaxPolicy(std::size_t input_dim, std::size_t hidden_dim,
                                   std::size_t n_actions)
    : shape_(ParamShape::mlp(input_dim, hidden_dim, n_actions)) {}

MlpSoftmaxPolicy::Forward MlpSoftmaxPolicy::forward(const ParamVector& params,
                                                    const State& state) const {
  check_params(params);
  const std::size_t in = shape_.input_dim, hid = shape_.hidden_dim, na = shape_.n_actions;
  if (state.size() != in)
    throw ContractError(fmt::format("mlp policy: state has {} entries, expected {}", state.size(), in));
  const auto th = params.values();
  const double* w1 = th.data();
  const double* b1 = w1 + hid * in;
  const double* w2 = b1 + hid;
  const double* b2 = w2 + na * hid;

  Forward fw{Vec(hid), Vec(hid), Vec(na)};
  for (std::size_t j = 0; j < hid; ++j) {
    double z = b1[j];
    for (std::size_t i = 0; i < in; ++i) z += w1[j * in + i] * state[i];
    fw.pre[j] = z;
    fw.hidden[j] = z > 0.0 ? z : 0.0;
  }
  for (std::size_t a = 0; a < na; ++a) {
    double z = b2[a];
    for (std::size_t j = 0; j < hid; ++j) z += w2[a * hid + j] * fw.hidden[j];
    fw.logits[a] = z;
  }
  if (!all_finite(fw.logits)) throw NumericError("mlp policy: non-finite logits");
  return fw;
}

void MlpSoftmaxPolicy::backward(const ParamVector& params, const State& state, const Forward& fw,
                                std::span<const double> probs, int action, Vec& grad) const {
  const std::size_t in = shape_.input_dim, hid = shape_.hidden_dim, na = shape_.n_actions;
  const double* w2 = params.values().data() + hid * in + hid;
  grad.assign(shape_.size(), 0.0);
  double* gw1 = grad.data();
  double* gb1 = gw1 + hid * in;
  double* gw2 = gb1 + hid;
  double* gb2 = gw2 + na * hid;

  Vec delta_hidden(hid, 0.0);
  for (std::size_t a = 0; a < na; ++a) {
    const double d = (static_cast<int>(a) == action ? 1.0 : 0.0) - probs[a];
    gb2[a] = d;
    for (std::size_t j = 0; j < hid; ++j) {
      gw2[a * hid + j] = d * fw.hidden[j];
      delta_hidden[j] += w2[a * hid + j] * d;
    }
  }
  for (std::size_t j = 0; j < hid; ++j) {
    // ReLU subgradient at 0 is 0.
    const double d = fw.pre[j] > 0.0 ? delta_hidden[j] : 0.0;
    gb1[j] = d;
    for (std::size_t i = 0; i < in; ++i) gw1[j * in + i] = d * state[i];
  }
}

Vec MlpSoftmaxPolicy::action_probs(const ParamVector& params, const State& state) const {
  return softmax(forward(params, state).logits);
}

double MlpSoftmaxPolicy::log_prob(const ParamVector& params, const State& state, int action) const {
  check_action(action, shape_.n_actions);
  return log_softmax_at(forward(params, state).logits, static_cast<std::size_t>(action));
}

Vec MlpSoftmaxPolicy::grad_log_prob(const ParamVector& params, const State& state,
                                    int action) const {
  check_action(action, shape_.n_actions);
  const Forward fw = forward(params, state);
  const Vec p = softmax(fw.logits);
  Vec g;
  backward(params, state, fw, p, action, g);
  return g;
}

int MlpSoftmaxPolicy::sample_with_score(const ParamVector& params, const State& state,
                                        RngStream& stream, Vec& score) const {
  const Forward fw = forward(params, state);
  const Vec p = softmax(fw.logits);
  const int a = pick(p, stream.uniform());
  backward(params, state, fw, p, a, score);
  return a;
}

Vec MlpSoftmaxPolicy::hidden_preactivations(const ParamVector& params, const State& state) const {
  return forward(params, state).pre;
}

ParamVector MlpSoftmaxPolicy::initial_params(RngStream& stream) const {
  const std::size_t in = shape_.input_dim, hid = shape_.hidden_dim, na = shape_.n_actions;
  Vec v(shape_.size(), 0.0);
  const double sd1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double sd2 = 1.0 / std::sqrt(static_cast<double>(hid));
  for (std::size_t i = 0; i < hid * in; ++i) v[i] = sd1 * draw_standard_normal(stream);
  double* w2 = v.data() + hid * in + hid;
  for (std::size_t i = 0; i < na * hid; ++i) w2[i] = sd2 * draw_standard_normal(stream);
  return ParamVector(shape_, std::move(v));
}

std::unique_ptr<Policy> make_policy(const ParamShape& shape) {
  if (shape.kind == PolicyKind::TabularSoftmax)
    return std::make_unique<TabularSoftmaxPolicy>(shape.n_states, shape.n_actions);
  return std::make_unique<MlpSoftmaxPolicy>(shape.input_dim, shape.hidden_dim, shape.n_actions);
}

}  // namespace otapg
