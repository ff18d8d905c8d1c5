#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spinrelax/errors.hpp"

namespace spinrelax {

struct CurveMeta {
  double T_K = std::numeric_limits<double>::quiet_NaN();
  double H_T = std::numeric_limits<double>::quiet_NaN();
  long long shots = 0;
  std::optional<std::uint64_t> seed;
  // other "# key=value" lines, kept in file order
  std::vector<std::pair<std::string, std::string>> extra;
};

/// Contrast samples against delay (us).
struct DecayCurve {
  Eigen::VectorXd delays;
  Eigen::VectorXd contrast;
  Eigen::VectorXd sigma;
  CurveMeta meta;

  Eigen::Index size() const { return delays.size(); }
  void validate() const;
};

struct StretchedExpParams {
  double C0 = 0.0;
  double T1 = 1.0;  // us
  double beta = 1.0;

  void validate() const;
};

/// C0 (1 - exp(-(t/T1)^beta)), elementwise over an array of delays.
double contrast_model(const StretchedExpParams& p, double t);

template <typename Derived>
Eigen::ArrayXd contrast_model(const StretchedExpParams& p, const Eigen::ArrayBase<Derived>& t) {
  return t.derived().unaryExpr([&p](double ti) { return contrast_model(p, ti); });
}

/// Shot-noise model: independent Poisson counts in the reference (N0) and
/// readout (N1) windows with mean photons_per_shot * shots reference photons.
struct NoiseModel {
  double photons_per_shot = std::numeric_limits<double>::infinity();
  long long shots = 1;
  double noiseless_sigma = 1e-6;  // reported sigma when photons are unlimited

  bool noiseless() const { return std::isinf(photons_per_shot); }
  double reference_mean() const { return photons_per_shot * double(shots); }

  static NoiseModel none() { return {}; }
  /// Photon budget giving a contrast standard error of rel * |C0| near C = 0.
  static NoiseModel relative(double rel, double c0, long long shots = 1000);
};

Eigen::VectorXd log_schedule(double lo, double hi, int n);
/// 30 log-spaced delays over [0.01 T1_guess, 10 T1_guess].
Eigen::VectorXd default_schedule(double t1_guess);

/// Analytic standard error of C = (N1 - N0)/N0 at true contrast c.
double contrast_sigma(double c, double reference_mean);

/// Forms C = (N1 - N0)/N0 from Poisson counts at every delay. A draw with
/// N0 = 0 is redrawn. Deterministic in seed.
DecayCurve synthesize_curve(const StretchedExpParams& p, const Eigen::VectorXd& delays, const NoiseModel& noise,
                            std::uint64_t seed);

/// Tabulated distribution of decay rates.
///
/// Point masses: survival is sum_i w_i exp(-rate_i t).
/// Density: rho(rate) sampled on a strictly increasing positive grid,
/// interpolated log-linearly in log(rate) (exact for power laws on each cell).
class RateDistribution {
 public:
  enum class Kind { point_masses, density };

  static RateDistribution point_masses(Eigen::VectorXd rates, Eigen::VectorXd weights);
  static RateDistribution density(Eigen::VectorXd rates, Eigen::VectorXd rho, double tolerance = 1e-6);

  Kind kind() const { return kind_; }
  const Eigen::VectorXd& rates() const { return rates_; }
  const Eigen::VectorXd& values() const { return values_; }
  /// Raw integral of the distribution before normalisation.
  double raw_norm() const { return raw_norm_; }

 private:
  Kind kind_ = Kind::point_masses;
  Eigen::VectorXd rates_;
  Eigen::VectorXd values_;
  double raw_norm_ = 1.0;

  friend double laplace_average(const RateDistribution&, double, double);
};

/// Integral of rho(rate) exp(-rate t) for a normalised distribution, by
/// adaptive Simpson quadrature in log(rate) on each grid cell.
double laplace_average(const RateDistribution& dist, double t, double rel_tol = 1e-6);

}  // namespace spinrelax
