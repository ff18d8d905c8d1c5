#include "spinrelax/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>

namespace spinrelax {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// FNV-1a over the bit patterns of the data
class Digest {
 public:
  void add(double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      state_ ^= (bits >> (8 * i)) & 0xffU;
      state_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// (J^T J)^+ via a symmetric eigendecomposition; symmetric PSD by construction.
Eigen::MatrixXd normal_inverse(const Eigen::MatrixXd& J) {
  const Eigen::MatrixXd A = J.transpose() * J;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 0.0) * 1e-15;
  Eigen::VectorXd inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv(i) = ev(i) > cutoff ? 1.0 / ev(i) : 0.0;
  Eigen::MatrixXd cov = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (cov + cov.transpose());
}

void check_identifiability(const Eigen::MatrixXd& J, const std::vector<std::string>& names, double max_condition) {
  const Eigen::Index k = J.cols();
  if (k == 0) return;
  Eigen::VectorXd norms = J.colwise().norm().transpose();
  std::vector<std::string> dead;
  for (Eigen::Index j = 0; j < k; ++j)
    if (!(norms(j) > 0) || !std::isfinite(norms(j))) dead.push_back(names[std::size_t(j)]);
  if (!dead.empty()) {
    std::string list;
    for (const auto& n : dead) list += (list.empty() ? "" : ", ") + n;
    throw IdentifiabilityError("parameters have no effect on the model: " + list, dead);
  }
  const Eigen::MatrixXd Jn = J * norms.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Jn, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cond = s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
  if (cond > max_condition) {
    const Eigen::VectorXd v = svd.matrixV().col(s.size() - 1).cwiseAbs();
    const double vmax = v.maxCoeff();
    std::vector<std::string> involved;
    std::string list;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (v(j) >= 0.1 * vmax) {
        involved.push_back(names[std::size_t(j)]);
        list += (list.empty() ? "" : ", ") + names[std::size_t(j)];
      }
    }
    throw IdentifiabilityError("Jacobian condition number " + std::to_string(cond) +
                                   " exceeds limit; colinear parameters: " + list,
                               involved);
  }
}

// --- stretched exponential --------------------------------------------------

constexpr std::array<const char*, 3> kCurveNames{"C0", "T1", "beta"};
constexpr std::array<const char*, 3> kCurveUnits{"1", "us", "1"};

struct CurveProblem {
  using Scalar = double;

  const DecayCurve& curve;
  std::array<bool, 3> free;
  StretchedExpParams base;

  StretchedExpParams unpack(const Eigen::VectorXd& x) const {
    StretchedExpParams p = base;
    Eigen::Index k = 0;
    if (free[0]) p.C0 = x(k++);
    if (free[1]) p.T1 = std::exp(x(k++));
    if (free[2]) p.beta = x(k++);
    return p;
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const {
    const StretchedExpParams p = unpack(x);
    Eigen::VectorXd r(curve.size());
    for (Eigen::Index i = 0; i < curve.size(); ++i)
      r(i) = (curve.contrast(i) - contrast_model(p, curve.delays(i))) / curve.sigma(i);
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    const StretchedExpParams p = unpack(x);
    const Eigen::MatrixXd full = stretched_exp_jacobian(p, curve.delays, free);
    Eigen::MatrixXd J(curve.size(), x.size());
    Eigen::Index k = 0;
    for (int j = 0; j < 3; ++j) {
      if (!free[std::size_t(j)]) continue;
      const double chain = (j == 1) ? p.T1 : 1.0;
      J.col(k++) = -(full.col(j) * chain).cwiseQuotient(curve.sigma);
    }
    return J;
  }
};

// --- rate surface ------------------------------------------------------------

constexpr std::array<bool, kSurfaceParamCount> kLogScale{true, false, true, false, true, true, true, true};

struct SurfaceKernel {
  std::vector<double> T, H, fa, fb;

  SurfaceKernel(std::span<const RatePoint> points, const SurfaceModelConfig& cfg) {
    for (const auto& pt : points) {
      const auto f = rate_frequencies(cfg.spin, pt.H, cfg.rate.branch);
      T.push_back(pt.T);
      H.push_back(pt.H);
      fa.push_back(f[0]);
      fb.push_back(f[1]);
    }
  }
  std::size_t size() const { return T.size(); }

  // per-point channel values and partials in SurfaceParam order
  void evaluate(const std::array<double, kSurfaceParamCount>& a, bool cross_relax, std::size_t i, double& value,
                double* grad) const {
    const double A1 = a[0], n1 = a[1], A2 = a[2], n2 = a[3], eta = a[4], tau = a[5];
    const double t = T[i];
    double v = 0.0;
    double g[kSurfaceParamCount] = {0, 0, 0, 0, 0, 0, 0, 0};

    const double tn2 = std::pow(t, n2);
    v += A2 * tn2;
    g[2] = tn2;
    g[3] = A2 * tn2 * std::log(t);

    for (double f : {fa[i], fb[i]}) {
      if (std::isnan(f)) continue;
      const double fn1 = f > 0 ? std::pow(f, n1) : 0.0;
      const double direct = A1 * t * fn1;
      v += direct;
      g[0] += t * fn1;
      g[1] += f > 0 ? direct * std::log(f) : 0.0;

      const double x = kTwoPi * f * tau * kGHzTimesPs;
      const double den = 1.0 + x * x;
      v += eta * tau / den;
      g[4] += tau / den;
      g[5] += eta * (1.0 - x * x) / (den * den);
    }
    if (cross_relax) {
      const double amp = a[6], w = a[7];
      const double q = H[i] / w;
      const double den = 1.0 + q * q;
      v += amp / den;
      g[6] = 1.0 / den;
      g[7] = amp * 2.0 * q * q / (w * den * den);
    }
    value = v;
    if (grad)
      for (int k = 0; k < kSurfaceParamCount; ++k) grad[k] = g[k];
  }
};

struct SurfaceProblem {
  using Scalar = double;

  const SurfaceKernel& kernel;
  const std::vector<double>& gamma;
  const std::vector<double>& sigma;
  std::vector<int> free_index;  // SurfaceParam indices being fitted
  std::array<double, kSurfaceParamCount> base;
  bool cross_relax;

  std::array<double, kSurfaceParamCount> unpack(const Eigen::VectorXd& x) const {
    auto a = base;
    for (std::size_t k = 0; k < free_index.size(); ++k) {
      const int j = free_index[k];
      a[std::size_t(j)] = kLogScale[std::size_t(j)] ? std::exp(x(Eigen::Index(k))) : x(Eigen::Index(k));
    }
    return a;
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const {
    const auto a = unpack(x);
    Eigen::VectorXd r(Eigen::Index(kernel.size()));
    for (std::size_t i = 0; i < kernel.size(); ++i) {
      double v = 0.0;
      kernel.evaluate(a, cross_relax, i, v, nullptr);
      r(Eigen::Index(i)) = (gamma[i] - v) / sigma[i];
    }
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    const auto a = unpack(x);
    Eigen::MatrixXd J(Eigen::Index(kernel.size()), Eigen::Index(free_index.size()));
    double g[kSurfaceParamCount];
    for (std::size_t i = 0; i < kernel.size(); ++i) {
      double v = 0.0;
      kernel.evaluate(a, cross_relax, i, v, g);
      for (std::size_t k = 0; k < free_index.size(); ++k) {
        const auto j = std::size_t(free_index[k]);
        const double chain = kLogScale[j] ? a[j] : 1.0;
        J(Eigen::Index(i), Eigen::Index(k)) = -g[j] * chain / sigma[i];
      }
    }
    return J;
  }
};

}  // namespace

const ParameterEstimate& FitResult::param(std::string_view name) const {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw DomainError("no parameter named " + std::string(name));
}

// ---------------------------------------------------------------------------

StretchedExpParams initial_guess(const DecayCurve& curve) {
  curve.validate();
  const Eigen::Index n = curve.size();
  if (n < 1) throw InsufficientDataError("empty curve");
  const double t_max = curve.delays(n - 1);
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (curve.delays(i) >= 0.1 * t_max) {
      sum += curve.contrast(i);
      ++count;
    }
  }
  StretchedExpParams p;
  p.beta = 0.8;
  p.C0 = count > 0 ? sum / count : curve.contrast(n - 1);
  if (p.C0 == 0) p.C0 = 1e-6;

  const double target = 1.0 - std::exp(-1.0);
  p.T1 = t_max;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (curve.contrast(i) / p.C0 >= target) {
      if (i == 0) {
        p.T1 = curve.delays(0) > 0 ? curve.delays(0) : (n > 1 ? curve.delays(1) : 1.0);
      } else {
        const double y0 = curve.contrast(i - 1) / p.C0, y1 = curve.contrast(i) / p.C0;
        const double s = (target - y0) / (y1 - y0);
        const double t0 = curve.delays(i - 1), t1 = curve.delays(i);
        p.T1 = (t0 > 0) ? std::exp(std::log(t0) + s * (std::log(t1) - std::log(t0))) : t0 + s * (t1 - t0);
      }
      break;
    }
  }
  if (!(p.T1 > 0)) p.T1 = t_max > 0 ? t_max : 1.0;
  return p;
}

Eigen::MatrixXd stretched_exp_jacobian(const StretchedExpParams& p, const Eigen::VectorXd& delays,
                                       std::array<bool, 3> free) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(delays.size(), 3);
  for (Eigen::Index i = 0; i < delays.size(); ++i) {
    const double t = delays(i);
    if (t <= 0) continue;  // model and all partials vanish at t = 0
    const double ratio = t / p.T1;
    const double u = std::pow(ratio, p.beta);
    const double e = std::exp(-u);
    if (free[0]) J(i, 0) = -std::expm1(-u);
    if (free[1]) J(i, 1) = -p.C0 * e * p.beta * u / p.T1;
    if (free[2]) J(i, 2) = p.C0 * e * u * std::log(ratio);
  }
  return J;
}

FitResult fit_stretched_exp(const DecayCurve& curve, const CurveFitOptions& options) {
  curve.validate();
  if (curve.size() < 5) throw InsufficientDataError("stretched-exponential fit needs at least 5 points");
  const auto& b = options.bounds;
  StretchedExpParams p0 = options.init ? *options.init : initial_guess(curve);
  std::array<bool, 3> free{true, true, true};
  if (options.fixed_beta) {
    if (!(*options.fixed_beta > 0) || !(*options.fixed_beta <= 2)) throw DomainError("fixed beta must lie in (0, 2]");
    p0.beta = *options.fixed_beta;
    free[2] = false;
  } else {
    p0.beta = std::clamp(p0.beta, b.beta_lo, b.beta_hi);
  }
  p0.T1 = std::clamp(p0.T1, b.t1_lo, b.t1_hi);

  CurveProblem problem{curve, free, p0};
  const int k = free[2] ? 3 : 2;
  Eigen::VectorXd x0(k), lo(k), hi(k);
  const double inf = std::numeric_limits<double>::infinity();
  x0(0) = p0.C0;
  lo(0) = -inf;
  hi(0) = inf;
  x0(1) = std::log(p0.T1);
  lo(1) = std::log(b.t1_lo);
  hi(1) = std::log(b.t1_hi);
  if (free[2]) {
    x0(2) = p0.beta;
    lo(2) = b.beta_lo;
    hi(2) = b.beta_hi;
  }

  const auto rep = levenberg_marquardt(problem, x0, lo, hi, options.lm);
  const StretchedExpParams best = problem.unpack(rep.x);

  FitResult fit;
  fit.model = "stretched_exp";
  fit.label = options.label.empty() ? (options.fixed_beta ? "beta=" + std::to_string(*options.fixed_beta) : "free_beta")
                                    : options.label;
  fit.fixed_beta = options.fixed_beta;
  const Eigen::MatrixXd cov_int = normal_inverse(rep.jacobian);
  Eigen::VectorXd chain(k);
  chain(0) = 1.0;
  chain(1) = best.T1;
  if (free[2]) chain(2) = 1.0;
  fit.covariance = chain.asDiagonal() * cov_int * chain.asDiagonal();
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose());

  const std::array<double, 3> values{best.C0, best.T1, best.beta};
  Eigen::Index c = 0;
  for (int j = 0; j < 3; ++j) {
    ParameterEstimate e{kCurveNames[std::size_t(j)], kCurveUnits[std::size_t(j)], values[std::size_t(j)], 0.0,
                        free[std::size_t(j)]};
    if (e.free) {
      e.std_error = std::sqrt(std::max(fit.covariance(c, c), 0.0));
      fit.free_names.push_back(e.name);
      ++c;
    }
    fit.params.push_back(e);
  }
  fit.n_points = int(curve.size());
  fit.n_free = k;
  fit.chi2 = rep.objective;
  fit.chi2_reduced = fit.n_points > k ? fit.chi2 / (fit.n_points - k) : kNaN;
  fit.n_iter = rep.iterations;
  fit.converged = rep.converged;
  fit.gradient_norm = rep.gradient_norm;
  fit.stop_reason = rep.stop_reason;
  fit.residuals = rep.residuals;
  fit.objective_trace = rep.objective_trace;

  Digest d;
  for (Eigen::Index i = 0; i < curve.size(); ++i) {
    d.add(curve.delays(i));
    d.add(curve.contrast(i));
    d.add(curve.sigma(i));
  }
  fit.data_digest = d.value();
  return fit;
}

StretchedExpParams stretched_exp_params(const FitResult& fit) {
  return {fit.value("C0"), fit.value("T1"), fit.value("beta")};
}

// ---------------------------------------------------------------------------

std::string_view surface_param_name(SurfaceParam p) {
  static constexpr std::array<std::string_view, kSurfaceParamCount> names{
      "A1", "n1", "A2", "n2", "eta", "tau_c", "cr_amplitude", "cr_half_width"};
  return names[std::size_t(p)];
}

std::string_view surface_param_unit(SurfaceParam p) {
  static constexpr std::array<std::string_view, kSurfaceParamCount> units{
      "ms^-1 K^-1 GHz^-n1", "1", "ms^-1 K^-n2", "1", "ms^-1 ps^-1", "ps", "ms^-1", "T"};
  return units[std::size_t(p)];
}

std::optional<SurfaceParam> surface_param_from_name(std::string_view name) {
  for (int k = 0; k < kSurfaceParamCount; ++k)
    if (surface_param_name(SurfaceParam(k)) == name) return SurfaceParam(k);
  return std::nullopt;
}

void RateSurface::validate() const {
  for (const auto& pt : points) {
    if (!std::isfinite(pt.T) || !std::isfinite(pt.H) || !std::isfinite(pt.gamma))
      throw DomainError("rate surface values must be finite");
    if (!(pt.T > 0)) throw DomainError("temperatures must be positive");
    if (!(pt.sigma > 0) || !std::isfinite(pt.sigma)) throw DomainError("sigma must be positive");
  }
}

std::array<double, kSurfaceParamCount> to_array(const RelaxationParams& p) {
  const CrossRelaxation cr = p.cross_relax.value_or(CrossRelaxation{});
  return {p.A1, p.n1, p.A2, p.n2, p.eta, p.tau_c, cr.amplitude, cr.half_width};
}

RelaxationParams from_array(const std::array<double, kSurfaceParamCount>& a, bool cross_relax) {
  RelaxationParams p;
  p.A1 = a[0];
  p.n1 = a[1];
  p.A2 = a[2];
  p.n2 = a[3];
  p.eta = a[4];
  p.tau_c = a[5];
  if (cross_relax) p.cross_relax = CrossRelaxation{a[6], a[7]};
  return p;
}

Eigen::VectorXd rate_model_values(const RelaxationParams& p, const SurfaceModelConfig& cfg,
                                  std::span<const RatePoint> points) {
  const SurfaceKernel kernel(points, cfg);
  const auto a = to_array(p);
  Eigen::VectorXd out(Eigen::Index(points.size()));
  for (std::size_t i = 0; i < kernel.size(); ++i) kernel.evaluate(a, cfg.cross_relax, i, out(Eigen::Index(i)), nullptr);
  return out;
}

Eigen::MatrixXd rate_model_jacobian(const RelaxationParams& p, const SurfaceModelConfig& cfg,
                                    std::span<const RatePoint> points) {
  const SurfaceKernel kernel(points, cfg);
  const auto a = to_array(p);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(Eigen::Index(points.size()), kSurfaceParamCount);
  double g[kSurfaceParamCount];
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    double v = 0.0;
    kernel.evaluate(a, cfg.cross_relax, i, v, g);
    for (int k = 0; k < kSurfaceParamCount; ++k)
      if (cfg.is_free(SurfaceParam(k))) J(Eigen::Index(i), k) = g[k];
  }
  return J;
}

namespace {

std::vector<std::size_t> canonical_order(const RateSurface& surface) {
  std::vector<std::size_t> idx(surface.points.size());
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& p = surface.points[a];
    const auto& q = surface.points[b];
    if (p.T != q.T) return p.T < q.T;
    if (p.H != q.H) return p.H < q.H;
    if (p.gamma != q.gamma) return p.gamma < q.gamma;
    if (p.sigma != q.sigma) return p.sigma < q.sigma;
    return p.masked < q.masked;
  });
  return idx;
}

std::vector<RatePoint> used_points(const RateSurface& surface, const SurfaceModelConfig& cfg,
                                   std::vector<std::size_t>* origin) {
  std::vector<RatePoint> out;
  for (std::size_t i : canonical_order(surface)) {
    if (RateSurface::excluded(surface.points[i], cfg)) continue;
    out.push_back(surface.points[i]);
    if (origin) origin->push_back(i);
  }
  return out;
}

}  // namespace

RelaxationParams initial_surface_guess(const RateSurface& surface, const SurfaceModelConfig& cfg,
                                       const SurfaceFitOptions& options) {
  RelaxationParams base;
  base.n1 = 1.5;
  base.n2 = 2.0;
  base.tau_c = 100.0;
  if (options.init) base = *options.init;
  if (cfg.cross_relax && !base.cross_relax) base.cross_relax = CrossRelaxation{};
  if (!cfg.cross_relax) base.cross_relax.reset();

  const auto& b = options.bounds;
  base.n1 = std::clamp(base.n1, b.n1_lo, b.n1_hi);
  base.n2 = std::clamp(base.n2, b.n2_lo, b.n2_hi);
  base.tau_c = std::clamp(base.tau_c, b.tau_c_lo, b.tau_c_hi);
  if (base.cross_relax)
    base.cross_relax->half_width = std::clamp(base.cross_relax->half_width, b.half_width_lo, b.half_width_hi);

  const std::vector<RatePoint> pts = used_points(surface, cfg, nullptr);
  if (pts.empty()) throw InsufficientDataError("no unmasked rate points");

  // amplitudes enter linearly: gamma = sum_k amp_k * basis_k
  const std::array<SurfaceParam, 4> amps{SurfaceParam::A1, SurfaceParam::A2, SurfaceParam::eta,
                                         SurfaceParam::cr_amplitude};
  std::vector<SurfaceParam> solve;
  for (auto a : amps)
    if (cfg.is_free(a)) solve.push_back(a);
  if (solve.empty()) return base;

  SurfaceModelConfig all = cfg;
  all.free.fill(true);
  auto unit = to_array(base);
  for (auto a : amps) unit[std::size_t(a)] = 1.0;
  const Eigen::MatrixXd basis = rate_model_jacobian(from_array(unit, cfg.cross_relax), all, pts);

  const Eigen::Index n = Eigen::Index(pts.size());
  Eigen::MatrixXd M(n, Eigen::Index(solve.size()));
  Eigen::VectorXd y(n);
  const Eigen::VectorXd fixed_part = rate_model_values(
      [&] {
        auto a = to_array(base);
        for (auto s : solve) a[std::size_t(s)] = 0.0;
        return from_array(a, cfg.cross_relax);
      }(),
      cfg, pts);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = 1.0 / pts[std::size_t(i)].sigma;
    y(i) = (pts[std::size_t(i)].gamma - fixed_part(i)) * w;
    for (std::size_t k = 0; k < solve.size(); ++k) M(i, Eigen::Index(k)) = basis(i, int(solve[k])) * w;
  }
  const Eigen::VectorXd sol = M.colPivHouseholderQr().solve(y);

  std::vector<double> gam;
  for (const auto& p : pts) gam.push_back(p.gamma);
  std::nth_element(gam.begin(), gam.begin() + gam.size() / 2, gam.end());
  const double median = std::abs(gam[gam.size() / 2]);

  auto a = to_array(base);
  for (std::size_t k = 0; k < solve.size(); ++k) {
    const auto j = std::size_t(solve[k]);
    double v = sol(Eigen::Index(k));
    if (!(v > 0) || !std::isfinite(v)) {
      const double bmax = basis.col(int(j)).cwiseAbs().maxCoeff();
      v = bmax > 0 ? 1e-3 * std::max(median, 1e-300) / bmax : 1e-6;
    }
    a[j] = v;
  }
  return from_array(a, cfg.cross_relax);
}

SurfaceModelConfig effective_surface_config(const SurfaceModelConfig& cfg, const SurfaceFitOptions& options) {
  SurfaceModelConfig out = cfg;
  const RelaxationParams init = options.init.value_or(RelaxationParams{0, 1.5, 0, 2, 0, 100, {}});
  const auto a = to_array(init);
  const std::array<std::pair<SurfaceParam, SurfaceParam>, 4> pairs{{{SurfaceParam::A1, SurfaceParam::n1},
                                                                    {SurfaceParam::A2, SurfaceParam::n2},
                                                                    {SurfaceParam::eta, SurfaceParam::tau_c},
                                                                    {SurfaceParam::cr_amplitude, SurfaceParam::cr_half_width}}};
  for (const auto& [amp, shape] : pairs)
    if (!out.is_free(amp) && a[std::size_t(amp)] == 0.0) out.fix(shape);
  return out;
}

FitResult fit_rate_surface(const RateSurface& surface, const SurfaceModelConfig& requested,
                           const SurfaceFitOptions& options) {
  surface.validate();
  requested.spin.validate();
  const SurfaceModelConfig cfg = effective_surface_config(requested, options);

  std::vector<int> free_index;
  std::vector<std::string> free_names;
  for (int k = 0; k < kSurfaceParamCount; ++k) {
    if (cfg.is_free(SurfaceParam(k))) {
      free_index.push_back(k);
      free_names.emplace_back(surface_param_name(SurfaceParam(k)));
    }
  }
  const int k = int(free_index.size());

  std::vector<std::size_t> origin;
  const std::vector<RatePoint> pts = used_points(surface, cfg, &origin);
  if (int(pts.size()) < k + 3)
    throw InsufficientDataError("surface fit needs at least " + std::to_string(k + 3) + " unmasked points, got " +
                                std::to_string(pts.size()));

  const RelaxationParams init = initial_surface_guess(surface, cfg, options);
  init.validate();

  const SurfaceKernel kernel(pts, cfg);
  std::vector<double> gamma, sigma;
  for (const auto& p : pts) {
    gamma.push_back(p.gamma);
    sigma.push_back(p.sigma);
  }
  const auto base = to_array(init);
  SurfaceProblem problem{kernel, gamma, sigma, free_index, base, cfg.cross_relax};

  const auto& b = options.bounds;
  Eigen::VectorXd x0(k), lo(k), hi(k);
  for (int c = 0; c < k; ++c) {
    const auto j = std::size_t(free_index[std::size_t(c)]);
    const double v = base[j];
    switch (SurfaceParam(j)) {
      case SurfaceParam::n1:
        lo(c) = b.n1_lo;
        hi(c) = b.n1_hi;
        break;
      case SurfaceParam::n2:
        lo(c) = b.n2_lo;
        hi(c) = b.n2_hi;
        break;
      case SurfaceParam::tau_c:
        lo(c) = std::log(b.tau_c_lo);
        hi(c) = std::log(b.tau_c_hi);
        break;
      case SurfaceParam::cr_half_width:
        lo(c) = std::log(b.half_width_lo);
        hi(c) = std::log(b.half_width_hi);
        break;
      default:  // positive amplitudes, effectively unbounded in log space
        lo(c) = -700.0;
        hi(c) = 700.0;
    }
    if (kLogScale[j] && !(v > 0))
      throw DomainError("initial value for " + std::string(surface_param_name(SurfaceParam(j))) + " must be positive");
    x0(c) = kLogScale[j] ? std::log(v) : v;
  }

  if (k > 0) check_identifiability(problem.jacobian(x0), free_names, options.max_condition);
  const auto rep = levenberg_marquardt(problem, x0, lo, hi, options.lm);
  if (k > 0) check_identifiability(rep.jacobian, free_names, options.max_condition);

  const auto best = problem.unpack(rep.x);
  FitResult fit;
  fit.model = "rate_surface";
  fit.label = options.label.empty() ? "surface" : options.label;
  fit.surface_config = cfg;
  fit.free_names = free_names;
  const Eigen::MatrixXd cov_int = normal_inverse(rep.jacobian);
  Eigen::VectorXd chain(k);
  for (int c = 0; c < k; ++c) {
    const auto j = std::size_t(free_index[std::size_t(c)]);
    chain(c) = kLogScale[j] ? best[j] : 1.0;
  }
  fit.covariance = chain.asDiagonal() * cov_int * chain.asDiagonal();
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose());

  int c = 0;
  for (int j = 0; j < kSurfaceParamCount; ++j) {
    const auto sp = SurfaceParam(j);
    if (!cfg.uses(sp)) continue;
    ParameterEstimate e{std::string(surface_param_name(sp)), std::string(surface_param_unit(sp)), best[std::size_t(j)],
                        0.0, cfg.is_free(sp)};
    if (e.free) {
      e.std_error = std::sqrt(std::max(fit.covariance(c, c), 0.0));
      ++c;
    }
    fit.params.push_back(e);
  }

  fit.n_points = int(pts.size());
  fit.n_free = k;
  fit.chi2 = rep.objective;
  fit.chi2_reduced = fit.n_points > k ? fit.chi2 / (fit.n_points - k) : kNaN;
  fit.n_iter = rep.iterations;
  fit.converged = rep.converged;
  fit.gradient_norm = rep.gradient_norm;
  fit.stop_reason = rep.stop_reason;
  fit.objective_trace = rep.objective_trace;
  fit.residuals = Eigen::VectorXd::Constant(Eigen::Index(surface.points.size()), kNaN);
  for (std::size_t i = 0; i < origin.size(); ++i) fit.residuals(Eigen::Index(origin[i])) = rep.residuals(Eigen::Index(i));

  Digest d;
  for (std::size_t i : canonical_order(surface)) {
    const auto& p = surface.points[i];
    d.add(p.T);
    d.add(p.H);
    d.add(p.gamma);
    d.add(p.sigma);
    d.add(RateSurface::excluded(p, cfg) ? 1.0 : 0.0);
  }
  fit.data_digest = d.value();
  return fit;
}

RelaxationParams relaxation_params(const FitResult& fit) {
  if (fit.model != "rate_surface") throw DomainError("not a rate-surface fit");
  RelaxationParams p;
  p.A1 = fit.value("A1");
  p.n1 = fit.value("n1");
  p.A2 = fit.value("A2");
  p.n2 = fit.value("n2");
  p.eta = fit.value("eta");
  p.tau_c = fit.value("tau_c");
  if (fit.surface_config && fit.surface_config->cross_relax)
    p.cross_relax = CrossRelaxation{fit.value("cr_amplitude"), fit.value("cr_half_width")};
  return p;
}

std::vector<double> default_surface_temperatures() {
  return {15, 20, 25, 30, 40, 50, 60, 75, 100, 125, 150, 175, 200, 225, 250};
}

std::vector<double> default_surface_fields() {
  return {0.0, 0.01, 0.02, 0.03, 0.04, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.25, 1.5,
          1.8, 2.1, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0};
}

RateSurface synthesize_rate_surface(const RelaxationParams& p, const SurfaceModelConfig& cfg,
                                    std::span<const double> temperatures, std::span<const double> fields,
                                    double rel_noise, std::uint64_t seed) {
  p.validate();
  if (!(rel_noise >= 0) || !std::isfinite(rel_noise)) throw DomainError("relative noise must be >= 0");
  RateOptions opts = cfg.rate;
  opts.include_lac = true;
  RelaxationParams q = p;
  if (!cfg.cross_relax) q.cross_relax.reset();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RateSurface out;
  for (double T : temperatures) {
    for (double H : fields) {
      const double model = gamma_total(q, cfg.spin, T, H, opts).total;
      RatePoint pt{T, H, model, rel_noise > 0 ? rel_noise * model : 1e-6 * model, false};
      if (rel_noise > 0) pt.gamma = model * (1.0 + rel_noise * normal(rng));
      pt.masked = !cfg.rate.include_lac && cfg.rate.mask.excludes(H);
      out.points.push_back(pt);
    }
  }
  out.validate();
  return out;
}

std::vector<RateBreakdown> decompose(const RelaxationParams& p, const SurfaceModelConfig& cfg,
                                     std::span<const RatePoint> points) {
  RateOptions opts = cfg.rate;
  opts.include_lac = true;
  RelaxationParams q = p;
  if (!cfg.cross_relax) q.cross_relax.reset();
  std::vector<RateBreakdown> out;
  out.reserve(points.size());
  for (const auto& pt : points) out.push_back(gamma_total(q, cfg.spin, pt.T, pt.H, opts));
  return out;
}

// ---------------------------------------------------------------------------

double aicc(const FitResult& fit) {
  const double n = fit.n_points, k = fit.n_free;
  if (n - k - 1 <= 0) return std::numeric_limits<double>::infinity();
  return fit.chi2 + 2 * k + 2 * k * (k + 1) / (n - k - 1);
}

std::vector<ModelRank> compare_models(std::span<const FitResult> fits) {
  if (fits.empty()) return {};
  for (const auto& f : fits)
    if (f.data_digest != fits[0].data_digest || f.n_points != fits[0].n_points)
      throw DomainError("model comparison needs fits to the same dataset");
  std::vector<ModelRank> out;
  for (std::size_t i = 0; i < fits.size(); ++i) out.push_back({i, fits[i].label, fits[i].n_free, aicc(fits[i]), 0.0});
  std::stable_sort(out.begin(), out.end(), [](const ModelRank& a, const ModelRank& b) { return a.aicc < b.aicc; });
  for (auto& r : out) r.delta = r.aicc - out.front().aicc;
  return out;
}

}  // namespace spinrelax
