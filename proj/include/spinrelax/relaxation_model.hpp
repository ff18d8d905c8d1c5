#pragma once

#include <array>
#include <optional>

#include "spinrelax/spin_hamiltonian.hpp"

namespace spinrelax {

/// Zero-field-centred Lorentzian in H modelling near-zero-field cross-relaxation.
struct CrossRelaxation {
  double amplitude = 0.0;   // 1/ms
  double half_width = 0.005;  // T
};

/// Coefficients of the total relaxation rate. Units are chosen so every
/// channel comes out in 1/ms:
///   A1     1/(ms K GHz^n1)
///   A2     1/(ms K^n2)
///   eta    1/(ms ps)
///   tau_c  ps
struct RelaxationParams {
  double A1 = 0.0;
  double n1 = 1.6;
  double A2 = 0.0;
  double n2 = 2.0;
  double eta = 0.0;
  double tau_c = 100.0;
  std::optional<CrossRelaxation> cross_relax;

  void validate() const;
};

/// Which spin transition supplies the frequency f0 entering the rates.
enum class TransitionBranch { upper, lower, both };

struct RateOptions {
  TransitionBranch branch = TransitionBranch::upper;
  ExclusionMask mask = ExclusionMask::standard();
  bool include_lac = false;  // evaluate inside exclusion windows
};

struct RateBreakdown {
  double direct = 0.0;
  double raman = 0.0;
  double spin_spin = 0.0;
  double cross_relax = 0.0;
  double total = 0.0;
};

struct SpinPhononRates {
  double direct = 0.0;
  double raman = 0.0;
};

/// A1 T f0^n1 and A2 T^n2. Linear-in-T direct term, no Bose refinement.
SpinPhononRates gamma_spin_phonon(const RelaxationParams& p, double temperature, double f0);

/// eta tau_c / (1 + (2 pi f0 tau_c)^2) with f0 in GHz and tau_c in ps.
double gamma_spin_spin(const RelaxationParams& p, double f0);

double gamma_cross_relax(const RelaxationParams& p, double field);

/// Frequencies (GHz) f0 used by the field-dependent channels for a branch.
/// Returns one or two frequencies; the second is NaN when unused.
std::array<double, 2> rate_frequencies(const SpinSystemParams& spin, double field, TransitionBranch branch);

RateBreakdown gamma_total(const RelaxationParams& p, const SpinSystemParams& spin, double temperature,
                          double field, const RateOptions& options = {});

struct FieldMinimum {
  double field = 0.0;
  double rate = 0.0;
  bool at_boundary = false;
};

/// Field in [lo, hi] minimising the total rate: coarse scan, then golden
/// section on the bracketing cells.
FieldMinimum argmin_field(const RelaxationParams& p, const SpinSystemParams& spin, double temperature, double lo,
                          double hi, const RateOptions& options = {}, int coarse_points = 400);

}  // namespace spinrelax
