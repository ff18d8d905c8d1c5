#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

namespace spinrelax {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A weighted least-squares problem: residuals r(x) and their Jacobian dr/dx.
template <typename P>
concept LeastSquaresProblem = requires(const P& p, const VectorX<typename P::Scalar>& x) {
  { p.residuals(x) } -> std::convertible_to<VectorX<typename P::Scalar>>;
  { p.jacobian(x) } -> std::convertible_to<MatrixX<typename P::Scalar>>;
};

template <typename Scalar>
struct LmOptions {
  Scalar lambda_start = Scalar(1e-3);
  Scalar lambda_up = Scalar(10);
  Scalar lambda_down = Scalar(10);
  Scalar lambda_max = Scalar(1e16);
  Scalar rel_tol = Scalar(1e-10);   // relative objective decrease
  Scalar grad_tol = Scalar(1e-8);   // infinity norm of projected J^T r, columns of J at unit norm
  int consecutive = 2;
  int max_iter = 500;
};

template <typename Scalar>
struct LmReport {
  VectorX<Scalar> x;
  VectorX<Scalar> residuals;
  MatrixX<Scalar> jacobian;
  Scalar objective = Scalar(0);  // sum of squared residuals
  Scalar gradient_norm = Scalar(0);
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<Scalar> objective_trace;  // objective after each accepted step, starting value first
};

namespace detail {

/// max_j |J_j^T r| / |J_j| over components free to move; its square bounds
/// the Gauss-Newton decrease available along any single parameter.
template <typename Scalar>
Scalar projected_gradient_norm(const VectorX<Scalar>& g, const MatrixX<Scalar>& J, const VectorX<Scalar>& x,
                               const VectorX<Scalar>& lower, const VectorX<Scalar>& upper) {
  Scalar norm = Scalar(0);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    // descent direction is -g; blocked components do not count
    if (x(i) <= lower(i) && g(i) > 0) continue;
    if (x(i) >= upper(i) && g(i) < 0) continue;
    const Scalar c = J.col(i).norm();
    if (c > Scalar(0)) norm = std::max(norm, std::abs(g(i)) / c);
  }
  return norm;
}

}  // namespace detail

/// Box-constrained Levenberg-Marquardt with Marquardt diagonal scaling.
///
/// Variables pinned at a bound are held for the step; trial points are
/// projected onto [lower, upper]; a step is accepted only if
/// it strictly lowers the objective. Convergence needs `consecutive` accepted
/// steps that each have a relative decrease below rel_tol and a projected
/// gradient below grad_tol, or a stall (lambda above lambda_max) at a point
/// whose projected gradient is below grad_tol.
template <LeastSquaresProblem Problem, typename Scalar = typename Problem::Scalar>
LmReport<Scalar> levenberg_marquardt(const Problem& problem, std::type_identity_t<VectorX<Scalar>> x,
                                     const std::type_identity_t<VectorX<Scalar>>& lower,
                                     const std::type_identity_t<VectorX<Scalar>>& upper,
                                     const std::type_identity_t<LmOptions<Scalar>>& opts = {}) {
  LmReport<Scalar> rep;
  x = x.cwiseMax(lower).cwiseMin(upper);
  VectorX<Scalar> r = problem.residuals(x);
  MatrixX<Scalar> J = problem.jacobian(x);
  Scalar f = r.squaredNorm();
  VectorX<Scalar> g = J.transpose() * r;
  Scalar lambda = opts.lambda_start;
  int streak = 0;
  rep.objective_trace.push_back(f);

  const Scalar tiny = std::numeric_limits<Scalar>::min();
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    const Scalar gnorm = detail::projected_gradient_norm(g, J, x, lower, upper);
    if (f <= tiny && gnorm < opts.grad_tol) {
      rep.converged = true;
      rep.stop_reason = "zero residual";
      break;
    }

    const MatrixX<Scalar> A = J.transpose() * J;
    VectorX<Scalar> scale = A.diagonal();
    const Scalar floor = std::max(scale.maxCoeff() * Scalar(1e-15), tiny);
    scale = scale.cwiseMax(floor);
    MatrixX<Scalar> damped = A;
    damped.diagonal() += lambda * scale;
    VectorX<Scalar> rhs = -g;
    // hold variables pinned at a bound with the gradient pushing outward
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if ((x(i) <= lower(i) && g(i) > 0) || (x(i) >= upper(i) && g(i) < 0)) {
        damped.row(i).setZero();
        damped.col(i).setZero();
        damped(i, i) = Scalar(1);
        rhs(i) = Scalar(0);
      }
    }
    const VectorX<Scalar> step = damped.ldlt().solve(rhs);
    const VectorX<Scalar> trial = (x + step).cwiseMax(lower).cwiseMin(upper);
    const VectorX<Scalar> r_trial = problem.residuals(trial);
    const Scalar f_trial = r_trial.allFinite() ? r_trial.squaredNorm() : std::numeric_limits<Scalar>::infinity();

    if (f_trial < f) {
      const Scalar rel = (f - f_trial) / std::max(f, tiny);
      x = trial;
      r = r_trial;
      f = f_trial;
      J = problem.jacobian(x);
      g = J.transpose() * r;
      lambda = std::max(lambda / opts.lambda_down, Scalar(1e-20));
      rep.objective_trace.push_back(f);
      const Scalar gn = detail::projected_gradient_norm(g, J, x, lower, upper);
      streak = (rel < opts.rel_tol && gn < opts.grad_tol) ? streak + 1 : 0;
      if (streak >= opts.consecutive) {
        rep.converged = true;
        rep.stop_reason = "objective and gradient tolerances met";
        ++iter;
        break;
      }
    } else {
      lambda *= opts.lambda_up;
      if (lambda > opts.lambda_max) {
        rep.converged = gnorm < opts.grad_tol;
        rep.stop_reason = rep.converged ? "no further decrease; gradient tolerance met"
                                        : "no further decrease; gradient above tolerance";
        break;
      }
    }
  }
  if (iter >= opts.max_iter && rep.stop_reason.empty()) rep.stop_reason = "maximum iterations reached";

  rep.x = x;
  rep.residuals = r;
  rep.jacobian = J;
  rep.objective = f;
  rep.gradient_norm = detail::projected_gradient_norm(g, J, x, lower, upper);
  rep.iterations = iter;
  return rep;
}

}  // namespace spinrelax
