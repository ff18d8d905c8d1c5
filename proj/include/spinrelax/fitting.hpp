#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "spinrelax/decay_profiles.hpp"
#include "spinrelax/levenberg_marquardt.hpp"
#include "spinrelax/relaxation_model.hpp"

namespace spinrelax {

struct ParameterEstimate {
  std::string name;
  std::string unit;
  double value = 0.0;
  double std_error = 0.0;  // 0 for fixed parameters
  bool free = false;
};

// ---------------------------------------------------------------------------
// Rate surface model configuration
// ---------------------------------------------------------------------------

enum class SurfaceParam : int { A1, n1, A2, n2, eta, tau_c, cr_amplitude, cr_half_width };
inline constexpr int kSurfaceParamCount = 8;

std::string_view surface_param_name(SurfaceParam p);
std::string_view surface_param_unit(SurfaceParam p);
std::optional<SurfaceParam> surface_param_from_name(std::string_view name);

struct SurfaceModelConfig {
  std::array<bool, kSurfaceParamCount> free{true, true, true, true, true, true, false, false};
  SpinSystemParams spin;
  RateOptions rate;
  bool cross_relax = false;  // include the zero-field Lorentzian term

  bool is_free(SurfaceParam p) const { return free[std::size_t(p)] && uses(p); }
  /// Cross-relaxation parameters only take part when cross_relax is set.
  bool uses(SurfaceParam p) const {
    return cross_relax || (p != SurfaceParam::cr_amplitude && p != SurfaceParam::cr_half_width);
  }
  SurfaceModelConfig& fix(SurfaceParam p) {
    free[std::size_t(p)] = false;
    return *this;
  }
  SurfaceModelConfig& release(SurfaceParam p) {
    free[std::size_t(p)] = true;
    return *this;
  }
};

struct FitResult {
  std::string model;  // "stretched_exp" or "rate_surface"
  std::string label;
  std::vector<ParameterEstimate> params;
  std::vector<std::string> free_names;
  Eigen::MatrixXd covariance;  // over free parameters, external units

  double chi2 = 0.0;
  double chi2_reduced = 0.0;
  int n_points = 0;
  int n_free = 0;

  int n_iter = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  std::string stop_reason;

  Eigen::VectorXd residuals;  // (data - model) / sigma in input order; NaN where masked
  std::vector<double> objective_trace;

  std::optional<double> fixed_beta;                  // stretched_exp
  std::optional<SurfaceModelConfig> surface_config;  // rate_surface
  std::uint64_t data_digest = 0;

  const ParameterEstimate& param(std::string_view name) const;
  double value(std::string_view name) const { return param(name).value; }
  double std_error(std::string_view name) const { return param(name).std_error; }
};

// ---------------------------------------------------------------------------
// Stretched-exponential curve fits
// ---------------------------------------------------------------------------

struct CurveBounds {
  double beta_lo = 0.1;
  double beta_hi = 1.5;
  double t1_lo = 1e-9;  // us
  double t1_hi = 1e6;   // us
};

struct CurveFitOptions {
  std::optional<StretchedExpParams> init;
  CurveBounds bounds;
  std::optional<double> fixed_beta;
  LmOptions<double> lm;
  std::string label;
};

/// C0 from the last-decade mean, T1 where the curve reaches (1 - 1/e) of it,
/// beta = 0.8.
StretchedExpParams initial_guess(const DecayCurve& curve);

/// d model / d (C0, T1, beta), one row per delay; fixed columns are zero.
Eigen::MatrixXd stretched_exp_jacobian(const StretchedExpParams& p, const Eigen::VectorXd& delays,
                                       std::array<bool, 3> free = {true, true, true});

FitResult fit_stretched_exp(const DecayCurve& curve, const CurveFitOptions& options = {});

StretchedExpParams stretched_exp_params(const FitResult& fit);

// ---------------------------------------------------------------------------
// Rate surface fits
// ---------------------------------------------------------------------------

struct RatePoint {
  double T = 0.0;      // K
  double H = 0.0;      // T
  double gamma = 0.0;  // 1/ms
  double sigma = 0.0;  // 1/ms
  bool masked = false;
};

struct RateSurface {
  std::vector<RatePoint> points;

  void validate() const;
  /// Whether a point is left out of objective sums under a configuration.
  static bool excluded(const RatePoint& pt, const SurfaceModelConfig& cfg) {
    return pt.masked || (!cfg.rate.include_lac && cfg.rate.mask.excludes(pt.H));
  }
};

struct SurfaceBounds {
  double n1_lo = 0.0, n1_hi = 5.0;
  double n2_lo = 0.0, n2_hi = 7.0;
  double tau_c_lo = 1e-3, tau_c_hi = 1e6;        // ps
  double half_width_lo = 1e-6, half_width_hi = 10.0;  // T
};

struct SurfaceFitOptions {
  std::optional<RelaxationParams> init;  // exponents / tau_c / fixed values; amplitudes re-solved when free
  SurfaceBounds bounds;
  LmOptions<double> lm;
  std::string label;
  double max_condition = 1e12;
};

std::array<double, kSurfaceParamCount> to_array(const RelaxationParams& p);
RelaxationParams from_array(const std::array<double, kSurfaceParamCount>& a, bool cross_relax);

Eigen::VectorXd rate_model_values(const RelaxationParams& p, const SurfaceModelConfig& cfg,
                                  std::span<const RatePoint> points);

/// d gamma / d parameter in SurfaceParam order, one row per point; columns of
/// fixed or unused parameters are zero.
Eigen::MatrixXd rate_model_jacobian(const RelaxationParams& p, const SurfaceModelConfig& cfg,
                                    std::span<const RatePoint> points);

/// Exponents and tau_c from options.init (default n1 = 1.5, n2 = 2,
/// tau_c = 100 ps); free amplitudes from a weighted linear least-squares solve,
/// which is exact for amplitudes once exponents are fixed.
RelaxationParams initial_surface_guess(const RateSurface& surface, const SurfaceModelConfig& cfg,
                                       const SurfaceFitOptions& options = {});

/// An amplitude held at exactly zero also fixes the parameter it exposes
/// (A1: n1, A2: n2, eta: tau_c, cr_amplitude: cr_half_width).
SurfaceModelConfig effective_surface_config(const SurfaceModelConfig& cfg, const SurfaceFitOptions& options = {});

FitResult fit_rate_surface(const RateSurface& surface, const SurfaceModelConfig& cfg,
                           const SurfaceFitOptions& options = {});

RelaxationParams relaxation_params(const FitResult& fit);

/// 15 to 250 K in 15 steps.
std::vector<double> default_surface_temperatures();
/// 0 to 7 T, dense below 0.05 T, with one row inside the anti-crossing window.
std::vector<double> default_surface_fields();

/// Rates on the T x H product grid with multiplicative Gaussian noise,
/// gamma = model * (1 + rel_noise * N(0, 1)) and sigma = rel_noise * model.
/// Points inside the exclusion mask are evaluated anyway and flagged masked.
/// rel_noise = 0 gives exact rates with sigma = 1e-6 * model.
RateSurface synthesize_rate_surface(const RelaxationParams& p, const SurfaceModelConfig& cfg,
                                    std::span<const double> temperatures, std::span<const double> fields,
                                    double rel_noise, std::uint64_t seed);

std::vector<RateBreakdown> decompose(const RelaxationParams& p, const SurfaceModelConfig& cfg,
                                     std::span<const RatePoint> points);

// ---------------------------------------------------------------------------
// Model comparison
// ---------------------------------------------------------------------------

struct ModelRank {
  std::size_t index = 0;  // into the input list
  std::string label;
  int n_free = 0;
  double aicc = 0.0;
  double delta = 0.0;
};

/// chi2 + 2k + 2k(k+1)/(n-k-1), ascending. All fits must share one dataset.
double aicc(const FitResult& fit);
std::vector<ModelRank> compare_models(std::span<const FitResult> fits);

}  // namespace spinrelax
