#include "spinrelax/decay_profiles.hpp"

#include <cmath>
#include <random>

namespace spinrelax {

void DecayCurve::validate() const {
  const auto n = delays.size();
  if (contrast.size() != n || sigma.size() != n)
    throw DomainError("delays, contrast and sigma must have equal lengths");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(delays(i) >= 0) || !std::isfinite(delays(i))) throw DomainError("delays must be finite and >= 0");
    if (i > 0 && !(delays(i) > delays(i - 1))) throw DomainError("delays must be strictly increasing");
    if (!(sigma(i) > 0) || !std::isfinite(sigma(i))) throw DomainError("sigma must be finite and > 0");
    if (!std::isfinite(contrast(i))) throw DomainError("contrast must be finite");
  }
}

void StretchedExpParams::validate() const {
  if (!std::isfinite(C0)) throw DomainError("C0 must be finite");
  if (!(T1 > 0) || !std::isfinite(T1)) throw DomainError("T1 must be positive");
  if (!(beta > 0) || !(beta <= 2)) throw DomainError("beta must lie in (0, 2]");
}

double contrast_model(const StretchedExpParams& p, double t) {
  if (!(t >= 0)) throw DomainError("delay must be non-negative");
  return p.C0 * -std::expm1(-std::pow(t / p.T1, p.beta));
}

NoiseModel NoiseModel::relative(double rel, double c0, long long shots) {
  if (!(rel > 0) || !(std::abs(c0) > 0) || shots < 1) throw DomainError("relative noise needs rel > 0, C0 != 0");
  const double sigma = rel * std::abs(c0);
  NoiseModel n;
  n.shots = shots;
  n.photons_per_shot = 2.0 / (sigma * sigma) / double(shots);
  return n;
}

Eigen::VectorXd log_schedule(double lo, double hi, int n) {
  if (!(lo > 0) || !(hi > lo) || n < 2) throw DomainError("log schedule needs 0 < lo < hi and n >= 2");
  Eigen::VectorXd out(n);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) out(i) = std::exp(a + (b - a) * i / (n - 1));
  out(0) = lo;
  out(n - 1) = hi;
  return out;
}

Eigen::VectorXd default_schedule(double t1_guess) { return log_schedule(0.01 * t1_guess, 10.0 * t1_guess, 30); }

double contrast_sigma(double c, double reference_mean) {
  return std::sqrt((1.0 + c) * (2.0 + c) / reference_mean);
}

DecayCurve synthesize_curve(const StretchedExpParams& p, const Eigen::VectorXd& delays, const NoiseModel& noise,
                            std::uint64_t seed) {
  p.validate();
  if (!noise.noiseless()) {
    if (!(noise.photons_per_shot > 0) || noise.shots < 1) throw DomainError("noise parameters must be positive");
  } else if (!(noise.noiseless_sigma > 0)) {
    throw DomainError("noiseless sigma must be positive");
  }

  DecayCurve curve;
  curve.delays = delays;
  curve.contrast.resize(delays.size());
  curve.sigma.resize(delays.size());
  curve.meta.shots = noise.noiseless() ? 0 : noise.shots;
  curve.meta.seed = seed;

  std::mt19937_64 rng(seed);
  const double mu0 = noise.reference_mean();
  for (Eigen::Index i = 0; i < delays.size(); ++i) {
    const double c = contrast_model(p, delays(i));
    if (noise.noiseless()) {
      curve.contrast(i) = c;
      curve.sigma(i) = noise.noiseless_sigma;
      continue;
    }
    if (!(c > -1.0)) throw DomainError("contrast must exceed -1 for count synthesis");
    std::poisson_distribution<long long> reference(mu0);
    std::poisson_distribution<long long> readout(mu0 * (1.0 + c));
    long long n0 = 0, n1 = 0;
    do {
      n0 = reference(rng);
      n1 = readout(rng);
    } while (n0 == 0);
    curve.contrast(i) = double(n1 - n0) / double(n0);
    curve.sigma(i) = contrast_sigma(c, mu0);
  }
  curve.validate();
  return curve;
}

namespace {

// log-linear interpolation of g on [ua, ub]
struct Cell {
  double ua, ub, ga, gb;
  bool log_linear;

  double g(double u) const {
    const double s = (u - ua) / (ub - ua);
    if (log_linear) return ga * std::pow(gb / ga, s);
    return ga + (gb - ga) * s;
  }
  double mass() const {
    const double du = ub - ua;
    if (log_linear && ga != gb) return du * (gb - ga) / std::log(gb / ga);
    return du * 0.5 * (ga + gb);
  }
};

double simpson_adapt(const Cell& cell, double t, double a, double b, double fa, double fm, double fb, double whole,
                     double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  auto f = [&](double u) { return cell.g(u) * std::exp(-std::exp(u) * t); };
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15 * tol) return left + right + diff / 15.0;
  return simpson_adapt(cell, t, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_adapt(cell, t, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

Cell make_cell(const Eigen::VectorXd& rates, const Eigen::VectorXd& g, Eigen::Index i) {
  return {std::log(rates(i)), std::log(rates(i + 1)), g(i), g(i + 1), g(i) > 0 && g(i + 1) > 0};
}

}  // namespace

RateDistribution RateDistribution::point_masses(Eigen::VectorXd rates, Eigen::VectorXd weights) {
  if (rates.size() == 0 || rates.size() != weights.size()) throw DomainError("rates and weights must match");
  if ((rates.array() < 0).any() || (weights.array() < 0).any()) throw DomainError("rates and weights must be >= 0");
  RateDistribution d;
  d.kind_ = Kind::point_masses;
  d.raw_norm_ = weights.sum();
  if (std::abs(d.raw_norm_ - 1.0) > 1e-6) throw DomainError("rate distribution is not normalised");
  d.rates_ = std::move(rates);
  d.values_ = std::move(weights);
  return d;
}

RateDistribution RateDistribution::density(Eigen::VectorXd rates, Eigen::VectorXd rho, double tolerance) {
  if (rates.size() < 2 || rates.size() != rho.size()) throw DomainError("density needs >= 2 matching samples");
  for (Eigen::Index i = 0; i < rates.size(); ++i) {
    if (!(rates(i) > 0)) throw DomainError("density grid must be positive");
    if (i > 0 && !(rates(i) > rates(i - 1))) throw DomainError("density grid must be strictly increasing");
    if (!(rho(i) >= 0) || !std::isfinite(rho(i))) throw DomainError("density must be finite and >= 0");
  }
  RateDistribution d;
  d.kind_ = Kind::density;
  // store density per unit log(rate)
  d.values_ = rho.cwiseProduct(rates);
  d.rates_ = std::move(rates);
  double norm = 0.0;
  for (Eigen::Index i = 0; i + 1 < d.rates_.size(); ++i) norm += make_cell(d.rates_, d.values_, i).mass();
  d.raw_norm_ = norm;
  if (std::abs(norm - 1.0) > tolerance) throw DomainError("rate density integrates to " + std::to_string(norm));
  return d;
}

double laplace_average(const RateDistribution& dist, double t, double rel_tol) {
  if (!(t >= 0) || !std::isfinite(t)) throw DomainError("time must be finite and >= 0");
  if (t == 0) return 1.0;
  const auto& rates = dist.rates_;
  const auto& vals = dist.values_;
  double sum = 0.0;
  if (dist.kind_ == RateDistribution::Kind::point_masses) {
    for (Eigen::Index i = 0; i < rates.size(); ++i) sum += vals(i) * std::exp(-rates(i) * t);
    return sum / dist.raw_norm_;
  }
  for (Eigen::Index i = 0; i + 1 < rates.size(); ++i) {
    if (rates(i) * t > 745.0) break;  // exp underflow; grid ascends
    const Cell cell = make_cell(rates, vals, i);
    const double mass = cell.mass();
    if (mass == 0) continue;
    auto f = [&](double u) { return cell.g(u) * std::exp(-std::exp(u) * t); };
    const double fa = f(cell.ua), fb = f(cell.ub), fm = f(0.5 * (cell.ua + cell.ub));
    const double whole = (cell.ub - cell.ua) / 6.0 * (fa + 4 * fm + fb);
    sum += simpson_adapt(cell, t, cell.ua, cell.ub, fa, fm, fb, whole, rel_tol * mass, 40);
  }
  return sum / dist.raw_norm_;
}

}  // namespace spinrelax
