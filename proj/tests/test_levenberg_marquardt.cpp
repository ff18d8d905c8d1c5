#include <cmath>
#include <random>

#include "doctest.h"
#include "spinrelax/levenberg_marquardt.hpp"

using namespace spinrelax;

namespace {

struct Rosenbrock {
  using Scalar = double;
  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const {
    return Eigen::Vector2d(10.0 * (x(1) - x(0) * x(0)), 1.0 - x(0));
  }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    Eigen::Matrix2d j;
    j << -20.0 * x(0), 10.0, -1.0, 0.0;
    return j;
  }
};

struct Linear {
  using Scalar = double;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const { return A * x - b; }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd&) const { return A; }
};

// y = a exp(-k t) with a constant offset that the model cannot absorb
struct Exponential {
  using Scalar = double;
  Eigen::VectorXd t, y;
  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const {
    return (y.array() - x(0) * (-x(1) * t.array()).exp()).matrix();
  }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd j(t.size(), 2);
    const Eigen::ArrayXd e = (-x(1) * t.array()).exp();
    j.col(0) = -e.matrix();
    j.col(1) = (x(0) * t.array() * e).matrix();
    return j;
  }
};

const Eigen::Vector2d kInf(INFINITY, INFINITY);

}  // namespace

TEST_SUITE("levenberg_marquardt") {
  TEST_CASE("Rosenbrock converges to (1, 1)") {
    const auto rep = levenberg_marquardt(Rosenbrock{}, Eigen::Vector2d(-1.2, 1.0), -kInf, kInf);
    CHECK(rep.converged);
    CHECK(rep.x(0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(rep.x(1) == doctest::Approx(1.0).epsilon(1e-8));
  }

  TEST_CASE("accepted steps strictly decrease the objective") {
    const auto rep = levenberg_marquardt(Rosenbrock{}, Eigen::Vector2d(-1.2, 1.0), -kInf, kInf);
    REQUIRE(rep.objective_trace.size() > 2);
    for (std::size_t i = 1; i < rep.objective_trace.size(); ++i)
      CHECK(rep.objective_trace[i] < rep.objective_trace[i - 1]);
    CHECK(rep.objective == rep.objective_trace.back());
  }

  TEST_CASE("linear problem matches the normal equations") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    Linear p;
    p.A = Eigen::MatrixXd(40, 3);
    p.b = Eigen::VectorXd(40);
    for (int i = 0; i < 40; ++i) {
      for (int j = 0; j < 3; ++j) p.A(i, j) = n(rng);
      p.b(i) = n(rng);
    }
    const Eigen::VectorXd exact = (p.A.transpose() * p.A).ldlt().solve(p.A.transpose() * p.b);
    const Eigen::Vector3d inf3 = Eigen::Vector3d::Constant(INFINITY);
    const auto rep = levenberg_marquardt(p, Eigen::Vector3d::Zero().eval(), (-inf3).eval(), inf3);
    CHECK(rep.converged);
    CHECK((rep.x - exact).norm() < 1e-9 * (1 + exact.norm()));
  }

  TEST_CASE("box constraints hold at every reported point") {
    const Eigen::Vector2d lo(-2.0, -2.0), hi(0.5, 2.0);
    const auto rep = levenberg_marquardt(Rosenbrock{}, Eigen::Vector2d(-1.2, 1.0), lo, hi);
    CHECK(rep.x(0) <= 0.5);
    CHECK(rep.x(0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(rep.x(1) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(rep.converged);
  }

  TEST_CASE("starting point outside the box is clamped") {
    const Eigen::Vector2d lo(0.0, 0.0), hi(3.0, 3.0);
    const auto rep = levenberg_marquardt(Rosenbrock{}, Eigen::Vector2d(-5.0, 9.0), lo, hi);
    CHECK((rep.x.array() >= lo.array()).all());
    CHECK((rep.x.array() <= hi.array()).all());
  }

  TEST_CASE("iteration cap yields an unconverged diagnostic") {
    LmOptions<double> o;
    o.max_iter = 2;
    const auto rep = levenberg_marquardt(Rosenbrock{}, Eigen::Vector2d(-1.2, 1.0), -kInf, kInf, o);
    CHECK_FALSE(rep.converged);
    CHECK(rep.iterations == 2);
    CHECK(rep.stop_reason == "maximum iterations reached");
  }

  TEST_CASE("converged fits have a small projected gradient") {
    Exponential p;
    p.t = Eigen::VectorXd::LinSpaced(30, 0.0, 5.0);
    p.y = (2.0 * (-1.3 * p.t.array()).exp() + 0.01 * (3.0 * p.t.array()).sin()).matrix();
    const auto rep = levenberg_marquardt(p, Eigen::Vector2d(1.0, 0.5), -kInf, kInf);
    CHECK(rep.converged);
    CHECK(rep.gradient_norm < 1e-8);
    CHECK(rep.x(1) == doctest::Approx(1.3).epsilon(1e-2));
  }

  TEST_CASE("deterministic") {
    const auto a = levenberg_marquardt(Rosenbrock{}, Eigen::Vector2d(-1.2, 1.0), -kInf, kInf);
    const auto b = levenberg_marquardt(Rosenbrock{}, Eigen::Vector2d(-1.2, 1.0), -kInf, kInf);
    CHECK(a.x == b.x);
    CHECK(a.objective_trace == b.objective_trace);
    CHECK(a.iterations == b.iterations);
  }

  TEST_CASE("long double instantiation") {
    struct P {
      using Scalar = long double;
      VectorX<long double> residuals(const VectorX<long double>& x) const {
        VectorX<long double> r(2);
        r << x(0) - 3.0L, 2.0L * (x(1) + 1.0L);
        return r;
      }
      MatrixX<long double> jacobian(const VectorX<long double>&) const {
        MatrixX<long double> j(2, 2);
        j << 1, 0, 0, 2;
        return j;
      }
    };
    VectorX<long double> x0 = VectorX<long double>::Zero(2);
    VectorX<long double> inf = VectorX<long double>::Constant(2, INFINITY);
    const auto rep = levenberg_marquardt(P{}, x0, (-inf).eval(), inf);
    CHECK(double(rep.x(0)) == doctest::Approx(3.0));
    CHECK(double(rep.x(1)) == doctest::Approx(-1.0));
  }
}
