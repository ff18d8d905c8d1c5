#pragma once

#include <algorithm>
#include <cmath>

#include "spinrelax/fitting.hpp"

namespace spinrelax::testing {

/// Reference parameter set used across the surface tests.
inline RelaxationParams reference_params() {
  RelaxationParams p;
  p.A1 = 2e-5;
  p.n1 = 1.6;
  p.A2 = 1e-3;
  p.n2 = 2.0;
  p.eta = 8.0;
  p.tau_c = 100.0;
  return p;
}

inline RateSurface reference_surface(double rel_noise, std::uint64_t seed, SurfaceModelConfig cfg = {}) {
  return synthesize_rate_surface(reference_params(), cfg, default_surface_temperatures(), default_surface_fields(),
                                 rel_noise, seed);
}

/// Central-difference agreement: |a - fd| <= tol * max(|a|, |fd|, natural),
/// where natural = |f| / scale is the magnitude a partial of f can have.
inline bool derivative_matches(double analytic, double fd, double f, double scale, double tol = 1e-6) {
  const double denom = std::max({std::abs(analytic), std::abs(fd), std::abs(f) / scale});
  if (denom == 0) return true;
  return std::abs(analytic - fd) <= tol * denom;
}

}  // namespace spinrelax::testing
