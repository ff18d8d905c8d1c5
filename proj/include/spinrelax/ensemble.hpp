#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "spinrelax/errors.hpp"

namespace spinrelax {

/// Static dipolar bath around one central spin.
///
/// Each bath spin at distance r adds coupling_prefactor * r^(-2 alpha) to the
/// central spin's rate. Bath spins are uniform in the shell r_min <= r <= R of
/// a d-ball, with R fixed by density * (V_d(R) - V_d(r_min)) = n_bath.
struct BathConfig {
  int dimension = 3;
  double alpha = 3.0;
  double density = 1.0;    // spins per unit volume (d=3) or area (d=2)
  int n_bath = 1000;
  int n_realizations = 10000;
  double coupling_prefactor = 1.0;
  std::optional<double> r_min;  // default: 0.1 * mean nearest-neighbour spacing
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency

  double resolved_r_min() const;
  double ball_radius() const;
  /// d / (2 alpha), the stretching exponent of the disorder average.
  double stable_index() const { return dimension / (2.0 * alpha); }
  void validate() const;
};

/// Mean nearest-neighbour distance of a Poisson point set.
double mean_nn_spacing(int dimension, double density);

/// Volume of the unit d-ball (pi for d=2, 4 pi / 3 for d=3).
double unit_ball_volume(int dimension);

/// Seed for realization i: SplitMix64 of root + (i + 1) * 0x9E3779B97F4A7C15.
std::uint64_t realization_seed(std::uint64_t root, std::uint64_t index);

/// Radial distances of the bath spins for one realization.
Eigen::VectorXd sample_distances(const BathConfig& cfg, std::uint64_t seed);

double rate_from_distances(const BathConfig& cfg, std::span<const double> distances);

double sample_realization(const BathConfig& cfg, std::uint64_t seed);

/// Rates of all cfg.n_realizations realizations, in realization order.
Eigen::VectorXd sample_rates(const BathConfig& cfg);

struct SurvivalCurve {
  Eigen::VectorXd times;
  Eigen::VectorXd survival;
  Eigen::VectorXd std_error;
};

SurvivalCurve survival_curve(const BathConfig& cfg, const Eigen::VectorXd& times);
SurvivalCurve survival_curve(const Eigen::VectorXd& rates, const Eigen::VectorXd& times);

/// Characteristic time tau of the unbounded-bath stretched exponential
/// exp(-(t/tau)^beta), beta = d/(2 alpha):
///   (t/tau)^beta = density * S_d / d * Gamma(1 - beta) * (c t)^beta
/// with S_d the unit-sphere surface (2 pi, 4 pi).
double characteristic_time(const BathConfig& cfg);

/// Log-spaced times over [1e-4 tau, 1e2 tau].
Eigen::VectorXd default_time_grid(const BathConfig& cfg, int n = 121);

struct BetaEstimate {
  double beta = 0.0;
  double std_error = 0.0;
  double tau = 0.0;
  int n_points = 0;
};

/// Slope of log(-log P) against log t over points with P in [p_lo, p_hi].
BetaEstimate estimate_beta(const SurvivalCurve& curve, double p_lo = 0.05, double p_hi = 0.8);

}  // namespace spinrelax
