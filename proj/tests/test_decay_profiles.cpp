#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "spinrelax/decay_profiles.hpp"

using namespace spinrelax;

namespace {

// One-sided stable law of index 1/2 with Laplace transform exp(-sqrt(t / tau)).
double levy_half_density(double rate, double tau) {
  const double c = 1.0 / std::sqrt(tau);
  return c / (2.0 * std::sqrt(std::numbers::pi)) * std::pow(rate, -1.5) * std::exp(-c * c / (4.0 * rate));
}

RateDistribution levy_distribution(double tau) {
  const int n = 20001;
  Eigen::VectorXd rates(n), rho(n);
  for (int i = 0; i < n; ++i) {
    rates(i) = std::pow(10.0, -4.0 + 20.0 * i / (n - 1));
    rho(i) = levy_half_density(rates(i), tau);
  }
  return RateDistribution::density(rates, rho);
}

}  // namespace

TEST_SUITE("decay_profiles") {
  TEST_CASE("contrast model examples") {
    CHECK(contrast_model({-0.1, 1.0, 1.0}, 1.0) == doctest::Approx(-0.1 * (1 - std::exp(-1.0))).epsilon(1e-14));
    CHECK(std::abs(contrast_model({-0.1, 1.0, 1.0}, 1.0) + 0.06321) < 1e-5);
    CHECK(contrast_model({0.3, 5.0, 0.6}, 0.0) == 0.0);
    for (double b : {0.3, 0.7, 1.0, 1.8})
      CHECK(contrast_model({-0.12, 50.0, b}, 50.0) == doctest::Approx(-0.12 * (1 - std::exp(-1.0))).epsilon(1e-14));
    CHECK(contrast_model({-0.12, 50.0, 0.7}, 1e9) == doctest::Approx(-0.12).epsilon(1e-14));
    CHECK_THROWS_AS(contrast_model({0.1, 1.0, 1.0}, -1.0), DomainError);
  }

  TEST_CASE("array overload matches the scalar form") {
    const StretchedExpParams p{0.2, 3.0, 0.7};
    const Eigen::ArrayXd t = log_schedule(0.01, 100.0, 40).array();
    const Eigen::ArrayXd c = contrast_model(p, t);
    for (Eigen::Index i = 0; i < t.size(); ++i) CHECK(c(i) == contrast_model(p, t(i)));
  }

  TEST_CASE("monotone in t with the sign of C0") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ub(0.05, 2.0), uT(0.1, 100.0);
    const Eigen::VectorXd t = log_schedule(1e-3, 1e4, 200);
    for (int k = 0; k < 100; ++k) {
      const double b = ub(rng), T1 = uT(rng);
      for (double c0 : {0.15, -0.15}) {
        const StretchedExpParams p{c0, T1, b};
        for (Eigen::Index i = 1; i < t.size(); ++i) {
          const double a = contrast_model(p, t(i - 1)), z = contrast_model(p, t(i));
          if (c0 > 0)
            CHECK(z >= a);
          else
            CHECK(z <= a);
        }
      }
    }
  }

  TEST_CASE("parameter validation") {
    CHECK_THROWS_AS((StretchedExpParams{0.1, 0.0, 1.0}.validate()), DomainError);
    CHECK_THROWS_AS((StretchedExpParams{0.1, 1.0, 0.0}.validate()), DomainError);
    CHECK_THROWS_AS((StretchedExpParams{0.1, 1.0, 2.5}.validate()), DomainError);
    CHECK_NOTHROW((StretchedExpParams{-0.1, 1.0, 2.0}.validate()));
  }

  TEST_CASE("default schedule") {
    const Eigen::VectorXd s = default_schedule(50.0);
    REQUIRE(s.size() == 30);
    CHECK(s(0) == doctest::Approx(0.5));
    CHECK(s(29) == doctest::Approx(500.0));
    for (Eigen::Index i = 1; i < s.size(); ++i)
      CHECK(std::log(s(i) / s(i - 1)) == doctest::Approx(std::log(1000.0) / 29).epsilon(1e-9));
  }

  TEST_CASE("noiseless synthesis reproduces the model") {
    const StretchedExpParams p{-0.12, 50.0, 0.7};
    const auto c = synthesize_curve(p, default_schedule(50.0), NoiseModel::none(), 3);
    for (Eigen::Index i = 0; i < c.size(); ++i) CHECK(c.contrast(i) == contrast_model(p, c.delays(i)));
    CHECK(c.meta.shots == 0);
    CHECK(c.sigma.minCoeff() > 0);
  }

  TEST_CASE("synthesis is deterministic in the seed") {
    const StretchedExpParams p{-0.12, 50.0, 0.7};
    const auto noise = NoiseModel::relative(0.03, p.C0);
    const auto a = synthesize_curve(p, default_schedule(50.0), noise, 42);
    const auto b = synthesize_curve(p, default_schedule(50.0), noise, 42);
    const auto c = synthesize_curve(p, default_schedule(50.0), noise, 43);
    CHECK(a.contrast == b.contrast);
    CHECK(a.sigma == b.sigma);
    CHECK(a.contrast != c.contrast);
    CHECK(a.meta.seed == std::optional<std::uint64_t>(42));
  }

  TEST_CASE("relative noise sets the contrast error near C = 0") {
    const auto n = NoiseModel::relative(0.03, -0.12, 1000);
    CHECK(contrast_sigma(0.0, n.reference_mean()) == doctest::Approx(0.03 * 0.12).epsilon(1e-12));
    CHECK_THROWS_AS(NoiseModel::relative(0.0, 0.1), DomainError);
    CHECK_THROWS_AS(NoiseModel::relative(0.03, 0.0), DomainError);
  }

  TEST_CASE("nonpositive noise parameters are rejected") {
    NoiseModel n;
    n.photons_per_shot = 0.0;
    CHECK_THROWS_AS(synthesize_curve({0.1, 1, 1}, default_schedule(1.0), n, 1), DomainError);
    n.photons_per_shot = -5.0;
    CHECK_THROWS_AS(synthesize_curve({0.1, 1, 1}, default_schedule(1.0), n, 1), DomainError);
    n.photons_per_shot = 10.0;
    n.shots = 0;
    CHECK_THROWS_AS(synthesize_curve({0.1, 1, 1}, default_schedule(1.0), n, 1), DomainError);
  }

  TEST_CASE("Monte Carlo spread matches the propagated sigma") {
    const StretchedExpParams p{-0.12, 50.0, 0.7};
    NoiseModel noise;
    noise.photons_per_shot = 20.0;
    noise.shots = 100;
    Eigen::VectorXd delay(1);
    delay << 50.0;
    const int n = 10000;
    double s1 = 0, s2 = 0;
    for (int k = 0; k < n; ++k) {
      const double c = synthesize_curve(p, delay, noise, std::uint64_t(k + 1)).contrast(0);
      s1 += c;
      s2 += c * c;
    }
    const double mean = s1 / n;
    const double sd = std::sqrt((s2 - n * mean * mean) / (n - 1));
    const double c = contrast_model(p, 50.0);
    const double expected = std::sqrt((1 + c) * (2 + c) / noise.reference_mean());
    CHECK(contrast_sigma(c, noise.reference_mean()) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::abs(sd / expected - 1.0) < 0.05);
  }

  TEST_CASE("synthesis is unbiased within three standard errors") {
    const StretchedExpParams p{-0.12, 50.0, 0.7};
    const auto noise = NoiseModel::relative(0.03, p.C0);
    const Eigen::VectorXd t = log_schedule(0.5, 500.0, 10);
    const int n = 2000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(t.size());
    Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(t.size());
    for (int k = 0; k < n; ++k) {
      const auto c = synthesize_curve(p, t, noise, std::uint64_t(1000 + k));
      sum += c.contrast;
      sum2 += c.contrast.cwiseAbs2();
    }
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double mean = sum(i) / n;
      const double sd = std::sqrt((sum2(i) - n * mean * mean) / (n - 1));
      CHECK(std::abs(mean - contrast_model(p, t(i))) < 3 * sd / std::sqrt(double(n)));
    }
  }

  TEST_CASE("curve validation") {
    DecayCurve c;
    c.delays = Eigen::Vector3d(0, 1, 1);
    c.contrast = Eigen::Vector3d(0, 0, 0);
    c.sigma = Eigen::Vector3d(1, 1, 1);
    CHECK_THROWS_AS(c.validate(), DomainError);
    c.delays = Eigen::Vector3d(0, 1, 2);
    c.sigma(1) = 0.0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c.sigma(1) = 1.0;
    CHECK_NOTHROW(c.validate());
    c.contrast.resize(2);
    CHECK_THROWS_AS(c.validate(), DomainError);
  }

  TEST_CASE("single bin distribution gives one exponential") {
    const auto d = RateDistribution::point_masses(Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Ones(1));
    for (double t : {0.0, 0.5, 2.0, 10.0}) CHECK(laplace_average(d, t) == doctest::Approx(std::exp(-0.3 * t)));
  }

  TEST_CASE("index-1/2 stable density gives a square-root stretched exponential") {
    for (double tau : {1.0, 30.0}) {
      const auto d = levy_distribution(tau);
      CHECK(std::abs(d.raw_norm() - 1.0) < 1e-6);
      for (double t : {0.0, 1e-3, 0.1, 1.0, 5.0, 30.0, 300.0}) {
        const double expect = std::exp(-std::sqrt(t / tau));
        CHECK(std::abs(laplace_average(d, t) - expect) < 1e-4);
      }
    }
  }

  TEST_CASE("unnormalised density is rejected") {
    Eigen::VectorXd r = log_schedule(0.1, 10.0, 50), rho = Eigen::VectorXd::Ones(50);
    CHECK_THROWS_AS(RateDistribution::density(r, rho), DomainError);
    CHECK_THROWS_AS(RateDistribution::point_masses(Eigen::Vector2d(1, 2), Eigen::Vector2d(0.5, 0.6)), DomainError);
    CHECK_THROWS_AS(RateDistribution::density(Eigen::Vector2d(2, 1), Eigen::Vector2d(1, 1)), DomainError);
  }

  TEST_CASE("two-exponential mixture is nonincreasing and log-convex") {
    const auto d = RateDistribution::point_masses(Eigen::Vector2d(0.1, 3.0), Eigen::Vector2d(0.4, 0.6));
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(60, 0.0, 20.0);
    std::vector<double> y;
    for (Eigen::Index i = 0; i < t.size(); ++i) y.push_back(std::log(laplace_average(d, t(i))));
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
      CHECK(y[i] <= y[i - 1]);
      CHECK(y[i - 1] + y[i + 1] - 2 * y[i] >= -1e-12);
    }
  }

  TEST_CASE("density average is nonincreasing and log-convex on a grid") {
    // log-normal rate density
    const int n = 20001;
    Eigen::VectorXd r(n), rho(n);
    for (int i = 0; i < n; ++i) {
      r(i) = std::pow(10.0, -6.0 + 12.0 * i / (n - 1));
      const double z = std::log(r(i)) / 1.3;
      rho(i) = std::exp(-0.5 * z * z) / (r(i) * 1.3 * std::sqrt(2 * std::numbers::pi));
    }
    const auto d = RateDistribution::density(r, rho);
    const Eigen::VectorXd t = log_schedule(1e-3, 1e2, 40);
    std::vector<double> y;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double v = laplace_average(d, t(i));
      CHECK(v > 0);
      CHECK(v <= 1);
      y.push_back(std::log(v));
    }
    for (std::size_t i = 1; i < y.size(); ++i) CHECK(y[i] <= y[i - 1]);
    // log-convexity in t on a non-uniform grid: slopes must increase
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
      const double s0 = (y[i] - y[i - 1]) / (t(Eigen::Index(i)) - t(Eigen::Index(i - 1)));
      const double s1 = (y[i + 1] - y[i]) / (t(Eigen::Index(i + 1)) - t(Eigen::Index(i)));
      CHECK(s1 >= s0 - 1e-9);
    }
    CHECK(laplace_average(d, 0.0) == 1.0);
  }
}
