#include "spinrelax/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace spinrelax {

double unit_ball_volume(int dimension) {
  switch (dimension) {
    case 2:
      return std::numbers::pi;
    case 3:
      return 4.0 * std::numbers::pi / 3.0;
  }
  throw ConfigurationError("dimension must be 2 or 3");
}

double mean_nn_spacing(int dimension, double density) {
  // E[r_nn] = Gamma(1 + 1/d) (density * V_d)^(-1/d)
  return std::tgamma(1.0 + 1.0 / dimension) * std::pow(density * unit_ball_volume(dimension), -1.0 / dimension);
}

double BathConfig::resolved_r_min() const { return r_min ? *r_min : 0.1 * mean_nn_spacing(dimension, density); }

double BathConfig::ball_radius() const {
  const double rmin = resolved_r_min();
  return std::pow(std::pow(rmin, dimension) + n_bath / (density * unit_ball_volume(dimension)), 1.0 / dimension);
}

void BathConfig::validate() const {
  if (dimension != 2 && dimension != 3) throw ConfigurationError("dimension must be 2 or 3");
  if (!(alpha > dimension / 2.0)) throw ConfigurationError("alpha must exceed dimension/2");
  if (!(density > 0) || !std::isfinite(density)) throw ConfigurationError("density must be positive");
  if (n_bath < 1 || n_realizations < 1) throw ConfigurationError("n_bath and n_realizations must be >= 1");
  if (!(coupling_prefactor > 0) || !std::isfinite(coupling_prefactor))
    throw ConfigurationError("coupling_prefactor must be positive");
  const double rmin = resolved_r_min();
  if (!(rmin > 0) || !std::isfinite(rmin)) throw ConfigurationError("r_min must be positive");
  // Rate from spins beyond R relative to the truncated mean is
  // (R / r_min)^(d - 2 alpha); keep it below 1%.
  const double r = ball_radius();
  const double boundary_share = std::pow(r / rmin, dimension - 2.0 * alpha);
  if (!(boundary_share < 0.01))
    throw ConfigurationError("n_bath = " + std::to_string(n_bath) + " at this density and r_min gives a ball radius " +
                             std::to_string(r) + "; boundary carries " + std::to_string(100 * boundary_share) +
                             "% of the mean rate (limit 1%)");
}

std::uint64_t realization_seed(std::uint64_t root, std::uint64_t index) {
  std::uint64_t z = root + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Eigen::VectorXd sample_distances(const BathConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int d = cfg.dimension;
  const double rmin = cfg.resolved_r_min();
  const double rmin_d = std::pow(rmin, d);
  const double big_d = std::pow(cfg.ball_radius(), d);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd r(cfg.n_bath);
  for (int j = 0; j < cfg.n_bath; ++j) {
    // uniform in the ball: r^d uniform on [0, R^d]; redraw inside the hard core
    double rd = 0.0;
    do {
      rd = unit(rng) * big_d;
    } while (rd < rmin_d);
    r(j) = std::pow(rd, 1.0 / d);
  }
  return r;
}

double rate_from_distances(const BathConfig& cfg, std::span<const double> distances) {
  double sum = 0.0;
  for (double r : distances) sum += std::pow(r, -2.0 * cfg.alpha);
  return cfg.coupling_prefactor * sum;
}

double sample_realization(const BathConfig& cfg, std::uint64_t seed) {
  const Eigen::VectorXd r = sample_distances(cfg, seed);
  return rate_from_distances(cfg, std::span<const double>(r.data(), std::size_t(r.size())));
}

Eigen::VectorXd sample_rates(const BathConfig& cfg) {
  cfg.validate();
  Eigen::VectorXd rates(cfg.n_realizations);
  unsigned threads = cfg.threads > 0 ? unsigned(cfg.threads) : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, unsigned(cfg.n_realizations));
  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) rates(i) = sample_realization(cfg, realization_seed(cfg.seed, std::uint64_t(i)));
  };
  if (threads <= 1) {
    work(0, cfg.n_realizations);
    return rates;
  }
  {
    std::vector<std::jthread> pool;
    const int chunk = (cfg.n_realizations + int(threads) - 1) / int(threads);
    for (unsigned t = 0; t < threads; ++t) {
      const int begin = int(t) * chunk;
      const int end = std::min(cfg.n_realizations, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  return rates;
}

SurvivalCurve survival_curve(const Eigen::VectorXd& rates, const Eigen::VectorXd& times) {
  for (Eigen::Index k = 1; k < times.size(); ++k)
    if (!(times(k) > times(k - 1))) throw DomainError("times must be increasing");
  const double n = double(rates.size());
  SurvivalCurve out{times, Eigen::VectorXd(times.size()), Eigen::VectorXd(times.size())};
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    const Eigen::ArrayXd decay = (-rates.array() * times(k)).exp();
    const double mean = decay.mean();
    out.survival(k) = mean;
    if (rates.size() > 1) {
      const double var = (decay - mean).square().sum() / (n - 1.0);
      out.std_error(k) = std::sqrt(var / n);
    } else {
      out.std_error(k) = 0.0;
    }
  }
  return out;
}

SurvivalCurve survival_curve(const BathConfig& cfg, const Eigen::VectorXd& times) {
  return survival_curve(sample_rates(cfg), times);
}

double characteristic_time(const BathConfig& cfg) {
  cfg.validate();
  const double beta = cfg.stable_index();
  const double sphere = cfg.dimension * unit_ball_volume(cfg.dimension);
  const double k = cfg.density * sphere / cfg.dimension * std::tgamma(1.0 - beta);
  return 1.0 / (cfg.coupling_prefactor * std::pow(k, 1.0 / beta));
}

Eigen::VectorXd default_time_grid(const BathConfig& cfg, int n) {
  const double tau = characteristic_time(cfg);
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i) t(i) = tau * std::pow(10.0, -4.0 + 6.0 * i / (n - 1));
  return t;
}

BetaEstimate estimate_beta(const SurvivalCurve& curve, double p_lo, double p_hi) {
  std::vector<double> x, y;
  for (Eigen::Index k = 0; k < curve.times.size(); ++k) {
    const double p = curve.survival(k);
    if (curve.times(k) > 0 && p > 0 && p < 1 && p >= p_lo && p <= p_hi) {
      x.push_back(std::log(curve.times(k)));
      y.push_back(std::log(-std::log(p)));
    }
  }
  const int n = int(x.size());
  if (n < 5) throw InsufficientDataError("need at least 5 points inside the survival window, got " + std::to_string(n));
  const Eigen::Map<const Eigen::ArrayXd> xs(x.data(), n), ys(y.data(), n);
  const double mx = xs.mean(), my = ys.mean();
  const double sxx = (xs - mx).square().sum();
  const double slope = ((xs - mx) * (ys - my)).sum() / sxx;
  const double intercept = my - slope * mx;
  const double ssr = (ys - intercept - slope * xs).square().sum();
  BetaEstimate out;
  out.beta = slope;
  out.std_error = n > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
  out.tau = std::exp(-intercept / slope);
  out.n_points = n;
  return out;
}

}  // namespace spinrelax
