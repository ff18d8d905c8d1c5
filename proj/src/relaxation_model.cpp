#include "spinrelax/relaxation_model.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace spinrelax {

void RelaxationParams::validate() const {
  for (double v : {A1, n1, A2, n2, eta, tau_c})
    if (!std::isfinite(v)) throw DomainError("relaxation parameters must be finite");
  if (A1 < 0 || A2 < 0 || eta < 0 || tau_c < 0)
    throw DomainError("A1, A2, eta and tau_c must be non-negative");
  if (cross_relax) {
    if (!(cross_relax->amplitude >= 0) || !std::isfinite(cross_relax->amplitude))
      throw DomainError("cross-relaxation amplitude must be finite and non-negative");
    if (!(cross_relax->half_width > 0) || !std::isfinite(cross_relax->half_width))
      throw DomainError("cross-relaxation half width must be positive");
  }
}

SpinPhononRates gamma_spin_phonon(const RelaxationParams& p, double temperature, double f0) {
  if (!(temperature > 0) || !std::isfinite(temperature)) throw DomainError("temperature must be positive");
  if (!(f0 >= 0) || !std::isfinite(f0)) throw DomainError("f0 must be non-negative");
  if (f0 == 0 && p.n1 <= 0) throw DomainError("f0 = 0 requires n1 > 0");
  return {p.A1 * temperature * std::pow(f0, p.n1), p.A2 * std::pow(temperature, p.n2)};
}

double gamma_spin_spin(const RelaxationParams& p, double f0) {
  if (!(f0 >= 0) || !std::isfinite(f0)) throw DomainError("f0 must be non-negative");
  const double x = kTwoPi * f0 * p.tau_c * kGHzTimesPs;
  return p.eta * p.tau_c / (1.0 + x * x);
}

double gamma_cross_relax(const RelaxationParams& p, double field) {
  if (!p.cross_relax) return 0.0;
  const double q = field / p.cross_relax->half_width;
  return p.cross_relax->amplitude / (1.0 + q * q);
}

std::array<double, 2> rate_frequencies(const SpinSystemParams& spin, double field, TransitionBranch branch) {
  const auto f = transition_frequencies(spin, field);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  switch (branch) {
    case TransitionBranch::upper:
      return {f.f_upper, nan};
    case TransitionBranch::lower:
      return {f.f_lower, nan};
    case TransitionBranch::both:
      return {f.f_upper, f.f_lower};
  }
  return {f.f_upper, nan};
}

RateBreakdown gamma_total(const RelaxationParams& p, const SpinSystemParams& spin, double temperature,
                          double field, const RateOptions& options) {
  p.validate();
  if (!options.include_lac && options.mask.excludes(field))
    throw MaskedRegionError("field " + std::to_string(field) + " T lies inside an anti-crossing exclusion window");
  RateBreakdown r;
  const auto freqs = rate_frequencies(spin, field, options.branch);
  bool raman_done = false;
  for (double f0 : freqs) {
    if (std::isnan(f0)) continue;
    const auto ph = gamma_spin_phonon(p, temperature, f0);
    r.direct += ph.direct;
    if (!raman_done) {
      r.raman = ph.raman;
      raman_done = true;
    }
    r.spin_spin += gamma_spin_spin(p, f0);
  }
  r.cross_relax = gamma_cross_relax(p, field);
  r.total = r.direct + r.raman + r.spin_spin + r.cross_relax;
  return r;
}

FieldMinimum argmin_field(const RelaxationParams& p, const SpinSystemParams& spin, double temperature, double lo,
                          double hi, const RateOptions& options, int coarse_points) {
  if (!(hi > lo)) throw DomainError("empty field range");
  if (coarse_points < 3) throw DomainError("need at least 3 coarse points");
  if (!options.include_lac && options.mask.intersects(lo, hi))
    throw MaskedRegionError("field range overlaps an anti-crossing exclusion window");

  auto rate = [&](double h) { return gamma_total(p, spin, temperature, h, options).total; };
  const double step = (hi - lo) / (coarse_points - 1);
  int best = 0;
  double best_rate = rate(lo);
  for (int i = 1; i < coarse_points; ++i) {
    const double v = rate(lo + i * step);
    if (v < best_rate) {
      best_rate = v;
      best = i;
    }
  }

  double a = lo + std::max(best - 1, 0) * step;
  double b = lo + std::min(best + 1, coarse_points - 1) * step;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = rate(c), fd = rate(d);
  while (b - a > 1e-7) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = rate(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = rate(d);
    }
  }
  FieldMinimum out;
  out.field = 0.5 * (a + b);
  out.rate = rate(out.field);
  // golden section never evaluates the bracket ends, so compare explicitly
  for (double edge : {lo, hi}) {
    if (std::abs(edge - out.field) <= step) {
      const double v = rate(edge);
      if (v <= out.rate) {
        out.field = edge;
        out.rate = v;
      }
    }
  }
  out.at_boundary = (out.field == lo || out.field == hi);
  return out;
}

}  // namespace spinrelax
