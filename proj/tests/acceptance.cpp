// Acceptance report: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>

#include "spinrelax/ensemble.hpp"
#include "spinrelax/fitting.hpp"
#include "spinrelax/io.hpp"
#include "spinrelax/json_io.hpp"
#include "spinrelax/spin_hamiltonian.hpp"
#include "support.hpp"

using namespace spinrelax;
using namespace spinrelax::testing;

namespace {

int failures = 0;

class Criterion {
 public:
  explicit Criterion(std::string name, double budget_s) : name_(std::move(name)), budget_(budget_s) {}

  void check(bool ok, const std::string& detail) {
    ok_ = ok_ && ok;
    if (!detail.empty()) detail_ += (detail_.empty() ? "" : "; ") + detail;
  }

  ~Criterion() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const bool in_time = budget_ <= 0 || s < budget_;
    const bool pass = ok_ && in_time;
    if (!pass) ++failures;
    std::printf("%s %s [%.2f s%s] %s\n", pass ? "PASS" : "FAIL", name_.c_str(), s,
                budget_ > 0 ? (in_time ? "" : ", over budget") : "", detail_.c_str());
    std::fflush(stdout);
  }

 private:
  std::string name_;
  double budget_;
  bool ok_ = true;
  std::string detail_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool decreasing(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (!(trace[i] <= trace[i - 1])) return false;
  return true;
}

bool lm_monotone = true;

void level_structure() {
  Criterion c("1 level structure", 1.0);
  const SpinSystemParams p{3.5, 0.0, 2.0};
  const double f7 = transition_frequencies(p, 7.0).f_upper;
  c.check(std::abs(f7 - 199.4) <= 0.1, fmt("f_upper(7 T) = %.4f GHz", f7));
  double best_h = 0, best_f = 1e300;
  for (int i = 0; i <= 30000; ++i) {
    const double h = 1e-5 * i;
    try {
      const double f = transition_frequencies(p, h).f_lower;
      if (f < best_f) best_f = f, best_h = h;
    } catch (const DegeneracyError&) {
    }
  }
  c.check(std::abs(best_h - 0.125) <= 0.0005, fmt("f_lower minimum at %.5f T", best_h));
}

void curve_round_trip() {
  Criterion c("2 stretched-exponential round trip", 30.0);
  const StretchedExpParams truth{-0.12, 50.0, 0.7};
  const Eigen::VectorXd delays = default_schedule(50.0);
  const auto noise = NoiseModel::relative(0.03, truth.C0);
  double sum_c0 = 0, sum_t1 = 0, sum_b = 0, sum_b2 = 0;
  int worse_half = 0, worse_one = 0;
  const int n = 100;
  for (int k = 0; k < n; ++k) {
    const auto curve = synthesize_curve(truth, delays, noise, std::uint64_t(1000 + k));
    const auto free = fit_stretched_exp(curve);
    lm_monotone = lm_monotone && decreasing(free.objective_trace);
    sum_c0 += free.value("C0");
    sum_t1 += free.value("T1");
    sum_b += free.value("beta");
    sum_b2 += free.value("beta") * free.value("beta");
    for (double b : {0.5, 1.0}) {
      CurveFitOptions o;
      o.fixed_beta = b;
      const auto fixed = fit_stretched_exp(curve, o);
      lm_monotone = lm_monotone && decreasing(fixed.objective_trace);
      if (fixed.chi2_reduced > free.chi2_reduced) ++(b == 0.5 ? worse_half : worse_one);
    }
  }
  const double bc0 = std::abs(sum_c0 / n / truth.C0 - 1), bt1 = std::abs(sum_t1 / n / truth.T1 - 1),
               bb = std::abs(sum_b / n / truth.beta - 1);
  const double mb = sum_b / n, sd = std::sqrt(std::max(0.0, sum_b2 / n - mb * mb));
  c.check(bc0 < 0.01 && bt1 < 0.01 && bb < 0.01, fmt("bias C0 %.4f, T1 %.4f, beta %.4f", bc0, bt1, bb));
  c.check(std::abs(mb - 0.7) <= 2 * sd, fmt("beta %.4f +- %.4f", mb, sd));
  c.check(worse_half >= 95 && worse_one >= 95, fmt("fixed worse: beta=0.5 %g/100, beta=1 %g/100", worse_half, worse_one));
}

void disorder_oracle() {
  Criterion c("3 disorder oracle", 120.0);
  for (int d : {3, 2}) {
    BathConfig cfg;
    cfg.dimension = d;
    cfg.alpha = 3.0;
    cfg.n_realizations = 10000;
    const auto est = estimate_beta(survival_curve(cfg, default_time_grid(cfg)));
    const bool ok = d == 3 ? (est.beta >= 0.45 && est.beta <= 0.55) : (est.beta >= 0.28 && est.beta <= 0.38);
    c.check(ok, fmt("d=%g beta %.4f", d, est.beta));
  }
}

FitResult surface_fit;

void surface_recovery() {
  Criterion c("4 surface-fit recovery", 60.0);
  const auto surface = reference_surface(0.03, 17);
  surface_fit = fit_rate_surface(surface, SurfaceModelConfig{});
  lm_monotone = lm_monotone && decreasing(surface_fit.objective_trace);
  const double e1 = std::abs(surface_fit.value("n1") / 1.6 - 1), e2 = std::abs(surface_fit.value("n2") / 2.0 - 1),
               et = std::abs(surface_fit.value("tau_c") / 100.0 - 1);
  c.check(surface_fit.converged, "");
  c.check(e1 < 0.05, fmt("n1 %.4f", surface_fit.value("n1")));
  c.check(e2 < 0.05, fmt("n2 %.4f", surface_fit.value("n2")));
  c.check(et < 0.20, fmt("tau_c %.2f ps", surface_fit.value("tau_c")));
}

void phenomenology() {
  const RelaxationParams p = relaxation_params(surface_fit);
  const SpinSystemParams spin;
  {
    Criterion c("5a interior field minimum in [1, 3] T", 0);
    for (double T : {30.0, 50.0, 100.0, 175.0, 250.0}) {
      const auto m = argmin_field(p, spin, T, 0.2, 7.0);
      c.check(!m.at_boundary && m.field >= 1.0 && m.field <= 3.0, fmt("T=%g K: %.3f T", T, m.field));
    }
  }
  {
    Criterion c("5b high-field direct slope within 2% of n1", 0);
    auto direct = [&](double H) { return gamma_total(p, spin, 100.0, H).direct; };
    const double h = 7.0, dh = 1e-4;
    const double slope = (std::log(direct(h + dh)) - std::log(direct(h - dh))) / (std::log(h + dh) - std::log(h - dh));
    c.check(std::abs(slope / p.n1 - 1) < 0.02, fmt("slope %.4f vs n1 %.4f", slope, p.n1));
  }
  {
    Criterion c("5c T-slope above 150 K at 0.03 T within 5% of n2", 0);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (double T = 150.0; T <= 250.0 + 1e-9; T += 10.0) {
      const double x = std::log(T), y = std::log(gamma_total(p, spin, T, 0.03).total);
      sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    c.check(std::abs(slope / p.n2 - 1) < 0.05, fmt("slope %.4f vs n2 %.4f", slope, p.n2));
  }
}

void jacobians() {
  Criterion c("6 Jacobian correctness", 10.0);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long bad = 0, total = 0;
  const Eigen::VectorXd t = log_schedule(0.01, 5000.0, 40);
  for (int k = 0; k < 1000; ++k) {
    const StretchedExpParams p{-1 + 2 * u(rng), 0.5 + 500 * u(rng), 0.1 + 1.4 * u(rng)};
    const Eigen::MatrixXd J = stretched_exp_jacobian(p, t);
    const std::array<double, 3> x{p.C0, p.T1, p.beta};
    for (int j = 0; j < 3; ++j) {
      const double scale = std::max(std::abs(x[std::size_t(j)]), 1e-3), h = 1e-6 * scale;
      auto at = [&](double d) {
        auto q = p;
        (j == 0 ? q.C0 : j == 1 ? q.T1 : q.beta) += d;
        return q;
      };
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double fd = (contrast_model(at(h), t(i)) - contrast_model(at(-h), t(i))) / (2 * h);
        const double f = std::max(std::abs(contrast_model(p, t(i))), std::abs(p.C0));
        ++total;
        if (!derivative_matches(J(i, j), fd, f, scale)) ++bad;
      }
    }
  }
  SurfaceModelConfig cfg;
  cfg.cross_relax = true;
  cfg.free.fill(true);
  std::vector<RatePoint> pts;
  for (double T : {15.0, 60.0, 250.0})
    for (double H : {0.0, 0.004, 0.03, 0.3, 1.8, 7.0}) pts.push_back({T, H, 0.0, 1.0, false});
  for (int k = 0; k < 1000; ++k) {
    cfg.rate.branch = k % 2 ? TransitionBranch::both : TransitionBranch::upper;
    RelaxationParams p;
    p.A1 = std::pow(10.0, -6 + 3 * u(rng));
    p.n1 = 5 * u(rng);
    p.A2 = std::pow(10.0, -5 + 3 * u(rng));
    p.n2 = 7 * u(rng);
    p.eta = std::pow(10.0, -1 + 2 * u(rng));
    p.tau_c = std::pow(10.0, 3 * u(rng));
    p.cross_relax = CrossRelaxation{std::pow(10.0, -1 + 2 * u(rng)), std::pow(10.0, -3 + 2 * u(rng))};
    const Eigen::MatrixXd J = rate_model_jacobian(p, cfg, pts);
    const Eigen::VectorXd f = rate_model_values(p, cfg, pts);
    const auto a = to_array(p);
    for (int j = 0; j < kSurfaceParamCount; ++j) {
      const double scale = std::max(std::abs(a[std::size_t(j)]), 1e-3), h = 1e-6 * scale;
      auto up = a, dn = a;
      up[std::size_t(j)] += h;
      dn[std::size_t(j)] -= h;
      const Eigen::VectorXd fd =
          (rate_model_values(from_array(up, true), cfg, pts) - rate_model_values(from_array(dn, true), cfg, pts)) / (2 * h);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        ++total;
        if (!derivative_matches(J(Eigen::Index(i), j), fd(Eigen::Index(i)), f(Eigen::Index(i)), scale)) ++bad;
      }
    }
  }
  c.check(bad == 0, fmt("%g of %g partials outside 1e-6", double(bad), double(total)));
}

void hygiene() {
  Criterion c("7 numerical hygiene", 0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uD(0.1, 10.0), uF(0.0, 0.99), ug(0.5, 3.0), uH(-10.0, 10.0);
  double worst = 0;
  for (int k = 0; k < 10000; ++k) {
    const double D = uD(rng);
    const SpinSystemParams p{D, uF(rng) * D, ug(rng)};
    const double H = uH(rng);
    const auto h = build_hamiltonian(p, H);
    const auto lv = eigenlevels(p, H);
    for (int j = 0; j < 3; ++j) {
      const Eigen::Vector3d v = lv.eigenvectors.col(j);
      worst = std::max(worst, (h * v - lv.eigenvalues(j) * v).norm() / h.norm());
    }
  }
  c.check(worst <= 1e-10, fmt("max residual / |H| = %.3g", worst));
  c.check(lm_monotone, lm_monotone ? "LM traces non-increasing" : "LM objective increased");

  const auto curve = [] {
    std::ostringstream os;
    write_decay_curve(os, synthesize_curve({-0.12, 50.0, 0.7}, default_schedule(50.0),
                                           NoiseModel::relative(0.03, -0.12), 42));
    return os.str();
  };
  BathConfig b1;
  b1.n_realizations = 2000;
  b1.threads = 1;
  BathConfig b8 = b1;
  b8.threads = 8;
  const auto surface = reference_surface(0.03, 42);
  const bool same = curve() == curve() && sample_rates(b1) == sample_rates(b8) &&
                    to_json(fit_rate_surface(surface, {})).dump() == to_json(fit_rate_surface(surface, {})).dump();
  c.check(same, same ? "seeded outputs bit-identical" : "seeded outputs differ");
}

}  // namespace

int main() {
  level_structure();
  curve_round_trip();
  disorder_oracle();
  surface_recovery();
  phenomenology();
  jacobians();
  hygiene();
  return failures == 0 ? 0 : 1;
}
