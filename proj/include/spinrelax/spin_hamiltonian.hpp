#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spinrelax/errors.hpp"
#include "spinrelax/units.hpp"

namespace spinrelax {

/// Ground-state spin-1 parameters. D and E in GHz, g dimensionless.
template <typename Scalar>
struct BasicSpinSystemParams {
  Scalar D = Scalar(3.5);
  Scalar E = Scalar(0);
  Scalar g = Scalar(2);

  /// g * mu_B / h in GHz per Tesla.
  Scalar zeeman_coeff() const { return g * Scalar(kBohrMagnetonGHzPerTesla); }

  void validate() const {
    using std::isfinite;
    if (!isfinite(D) || !isfinite(E) || !isfinite(g))
      throw DomainError("spin parameters must be finite");
    if (!(D > Scalar(0))) throw DomainError("D must be positive");
    if (!(E >= Scalar(0)) || !(E < D)) throw DomainError("E must satisfy 0 <= E < D");
    if (!(g > Scalar(0))) throw DomainError("g must be positive");
  }
};

using SpinSystemParams = BasicSpinSystemParams<double>;

template <typename Scalar>
using SpinMatrix = Eigen::Matrix<Scalar, 3, 3>;

/// Eigenlevels of the spin Hamiltonian at one field, ascending.
template <typename Scalar>
struct BasicLevelSet {
  Eigen::Matrix<Scalar, 3, 1> eigenvalues;
  SpinMatrix<Scalar> eigenvectors;  // columns, basis order m_s = {+1, 0, -1}
  Scalar field = Scalar(0);
};

using LevelSet = BasicLevelSet<double>;

template <typename Scalar>
struct BasicTransitionFrequencies {
  Scalar f_lower = Scalar(0);  // |0> <-> |-1>-like
  Scalar f_upper = Scalar(0);  // |0> <-> |+1>-like
};

using TransitionFrequencies = BasicTransitionFrequencies<double>;

/// D Sz^2 + E (Sx^2 - Sy^2) + g mu_B H Sz in the m_s = {+1, 0, -1} basis (GHz).
///
/// For S = 1, Sx^2 - Sy^2 = (S+^2 + S-^2) / 2 couples only m_s = +1 and -1 with
/// unit matrix element, so the Hamiltonian is real symmetric in this basis.
template <typename Scalar>
SpinMatrix<Scalar> build_hamiltonian(const BasicSpinSystemParams<Scalar>& params, Scalar field) {
  using std::isfinite;
  if (!isfinite(field)) throw DomainError("field must be finite");
  params.validate();
  const Scalar zeeman = params.zeeman_coeff() * field;
  SpinMatrix<Scalar> h = SpinMatrix<Scalar>::Zero();
  h(0, 0) = params.D + zeeman;
  h(2, 2) = params.D - zeeman;
  h(0, 2) = params.E;
  h(2, 0) = params.E;
  return h;
}

template <typename Scalar>
BasicLevelSet<Scalar> eigenlevels(const BasicSpinSystemParams<Scalar>& params, Scalar field) {
  const SpinMatrix<Scalar> h = build_hamiltonian(params, field);
  Eigen::SelfAdjointEigenSolver<SpinMatrix<Scalar>> solver(h);
  if (solver.info() != Eigen::Success) throw DomainError("eigensolver failed");
  // SelfAdjointEigenSolver returns eigenvalues in increasing order.
  return {solver.eigenvalues(), solver.eigenvectors(), field};
}

/// Transition frequencies between the m_s = 0-like state and the other two.
///
/// The m_s = 0-like eigenstate is the one with the largest overlap with the
/// |0> basis vector; of the remaining two the |+1>-like state has the larger
/// overlap with |+1> (ties go to the higher level).
template <typename Scalar>
BasicTransitionFrequencies<Scalar> label_transitions(const BasicLevelSet<Scalar>& levels) {
  using std::abs;
  const auto& v = levels.eigenvectors;
  int zero = 0;
  Scalar best = Scalar(-1);
  for (int k = 0; k < 3; ++k) {
    const Scalar w = v(1, k) * v(1, k);
    if (w > best) {
      best = w;
      zero = k;
    }
  }
  if (best < Scalar(0.5))
    throw DegeneracyError("cannot identify m_s=0 state at field " + std::to_string(double(levels.field)) + " T",
                          double(levels.field));
  int a = (zero + 1) % 3;
  int b = (zero + 2) % 3;
  if (a > b) std::swap(a, b);
  const Scalar wa = v(0, a) * v(0, a);
  const Scalar wb = v(0, b) * v(0, b);
  // b is the higher level since eigenvalues ascend
  const bool b_is_plus = !(wa > wb + Scalar(1e-12));
  const int plus = b_is_plus ? b : a;
  const int minus = b_is_plus ? a : b;
  const Scalar e0 = levels.eigenvalues(zero);
  return {abs(levels.eigenvalues(minus) - e0), abs(levels.eigenvalues(plus) - e0)};
}

template <typename Scalar>
BasicTransitionFrequencies<Scalar> transition_frequencies(const BasicSpinSystemParams<Scalar>& params,
                                                          Scalar field) {
  return label_transitions(eigenlevels(params, field));
}

struct FieldInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double h) const { return h >= lo && h <= hi; }
};

/// Closed field intervals excluded from analysis around level anti-crossings.
struct ExclusionMask {
  std::vector<FieldInterval> intervals;

  bool excludes(double field) const {
    for (const auto& w : intervals)
      if (w.contains(field)) return true;
    return false;
  }
  bool intersects(double lo, double hi) const {
    for (const auto& w : intervals)
      if (w.lo <= hi && w.hi >= lo) return true;
    return false;
  }
  /// [0.05, 0.17] T and its mirror image.
  static ExclusionMask standard();
};

ExclusionMask exclusion_windows(const SpinSystemParams& params, double lo = 0.05, double hi = 0.17);

/// Field in [lo, hi] minimising f_lower, refined by golden-section search.
double lower_transition_minimum(const SpinSystemParams& params, double lo, double hi, double tol = 1e-10);

}  // namespace spinrelax
