#include "spinrelax/spin_hamiltonian.hpp"

#include <cmath>

namespace spinrelax {

ExclusionMask ExclusionMask::standard() { return exclusion_windows(SpinSystemParams{}); }

ExclusionMask exclusion_windows(const SpinSystemParams& params, double lo, double hi) {
  params.validate();
  if (!(lo >= 0.0) || !(hi > lo)) throw DomainError("exclusion window needs 0 <= lo < hi");
  return {{{-hi, -lo}, {lo, hi}}};
}

double lower_transition_minimum(const SpinSystemParams& params, double lo, double hi, double tol) {
  if (!(hi > lo)) throw DomainError("empty field range");
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double h) { return transition_frequencies(params, h).f_lower; };
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace spinrelax
