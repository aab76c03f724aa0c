#include "otapg/channel.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace otapg {

double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma: x must be > 0");
  return std::lgamma(x);
}

namespace {

ChannelMoments analytic_moments(ChannelKind kind, double p1, double p2) {
  switch (kind) {
    case ChannelKind::Ideal:
      return {1.0, 0.0};
    case ChannelKind::Rayleigh: {
      if (!(p1 > 0.0)) throw ParameterError("rayleigh: scale must be > 0");
      return {p1 * std::sqrt(std::numbers::pi / 2.0), p1 * p1 * (4.0 - std::numbers::pi) / 2.0};
    }
    case ChannelKind::NakagamiM: {
      if (!(p1 > 0.0) || !(p2 > 0.0)) throw ParameterError("nakagami: m and omega must be > 0");
      const double mean = std::exp(log_gamma(p1 + 0.5) - log_gamma(p1)) * std::sqrt(p2 / p1);
      return {mean, p2 - mean * mean};
    }
    case ChannelKind::Deterministic:
      if (!(p1 > 0.0)) throw ParameterError("deterministic: gain must be > 0");
      return {p1, 0.0};
    case ChannelKind::Moments:
      if (!(p1 > 0.0) || !(p2 >= 0.0))
        throw ParameterError("moments: mean must be > 0 and variance >= 0");
      return {p1, p2};
  }
  throw ParameterError("unknown channel kind");
}

}  // namespace

ChannelModel::ChannelModel(ChannelKind kind, double p1, double p2) : kind_(kind), p1_(p1), p2_(p2) {
  const auto m = analytic_moments(kind, p1, p2);
  mean_ = m.mean;
  var_ = m.variance;
}

ChannelModel ChannelModel::ideal() { return {ChannelKind::Ideal, 0.0, 0.0}; }
ChannelModel ChannelModel::rayleigh(double scale) { return {ChannelKind::Rayleigh, scale, 0.0}; }
ChannelModel ChannelModel::nakagami(double m, double omega) {
  return {ChannelKind::NakagamiM, m, omega};
}
ChannelModel ChannelModel::deterministic(double gain) {
  return {ChannelKind::Deterministic, gain, 0.0};
}
ChannelModel ChannelModel::moments(double mean, double variance) {
  return {ChannelKind::Moments, mean, variance};
}

std::string ChannelModel::label() const {
  switch (kind_) {
    case ChannelKind::Ideal: return "ideal";
    case ChannelKind::Rayleigh: return fmt::format("rayleigh{:g}", p1_);
    case ChannelKind::NakagamiM: return fmt::format("nakagami{:g}-{:g}", p1_, p2_);
    case ChannelKind::Deterministic: return fmt::format("det{:g}", p1_);
    case ChannelKind::Moments: return fmt::format("moments{:g}-{:g}", p1_, p2_);
  }
  return "unknown";
}

ChannelMoments channel_moments(const ChannelModel& model) {
  return analytic_moments(model.kind(), model.param1(), model.param2());
}

double draw_channel_gain(RngStream& stream, const ChannelModel& model) {
  switch (model.kind()) {
    case ChannelKind::Ideal:
      return 1.0;
    case ChannelKind::Deterministic:
      return model.param1();
    case ChannelKind::Rayleigh:
      return model.param1() * std::sqrt(-2.0 * std::log(stream.uniform()));
    case ChannelKind::NakagamiM: {
      const double m = model.param1();
      return std::sqrt(draw_gamma(stream, m, model.param2() / m));
    }
    case ChannelKind::Moments: {
      const double mean = model.param1();
      const double var = model.param2();
      if (var == 0.0) return mean;
      return draw_gamma(stream, mean * mean / var, var / mean);
    }
  }
  throw ParameterError("unknown channel kind");
}

}  // namespace otapg
