#pragma once

#include <string>

#include "otapg/rng.hpp"

namespace otapg {

// ln Gamma(x) for x > 0.
double log_gamma(double x);

enum class ChannelKind { Ideal, Rayleigh, NakagamiM, Deterministic, Moments };

struct ChannelMoments {
  double mean;      // m_h
  double variance;  // sigma_h^2
};

// Fading distribution of the per-agent gain h_{i,k}. The moments are derived
// from the kind and its parameters at construction and never set directly.
//
// `Moments` is the user-supplied override: the caller names (m_h, sigma_h^2)
// and gains are drawn from the Gamma law with exactly those moments.
class ChannelModel {
 public:
  static ChannelModel ideal();
  static ChannelModel rayleigh(double scale);
  static ChannelModel nakagami(double shape_m, double spread_omega);
  static ChannelModel deterministic(double gain);
  static ChannelModel moments(double mean, double variance);

  ChannelKind kind() const { return kind_; }
  double param1() const { return p1_; }
  double param2() const { return p2_; }
  double mean_gain() const { return mean_; }
  double var_gain() const { return var_; }

  // Short identifier used in file names, e.g. "rayleigh1" or "nakagami0.1-1".
  std::string label() const;

 private:
  ChannelModel(ChannelKind kind, double p1, double p2);

  ChannelKind kind_;
  double p1_;
  double p2_;
  double mean_;
  double var_;
};

// Exact analytic (m_h, sigma_h^2) for a kind and its parameters.
ChannelMoments channel_moments(const ChannelModel& model);

double draw_channel_gain(RngStream& stream, const ChannelModel& model);

}  // namespace otapg
