#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "breather/kernels.hpp"

using namespace breather;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// time-domain kernels whose single-period integrals realize the tabulated
// coefficient families; the raw triangle dist(t, TZ) carries twice the
// odd-harmonic amplitude, so the triangular family corresponds to the
// half-relaxed triangle (dist + mean)/2
double nu_time(double T, double t) {
  double f = t - std::floor(t / T) * T;
  return 0.5 * (std::min(f, T - f) + T / 4.0);
}
double g_time(double T, double t) {
  double c = std::cos(kTwoPi / T * t);
  return c * std::abs(c);
}
}  // namespace

TEST_CASE("triangular kernel coefficients match their defining integrals") {
  // absolute 1e-8 with 2e5 Simpson panels (the acceptance gate re-runs this
  // at 1e6 panels / 1e-9); the integrand has a kink at T/2
  for (double T : {kTwoPi, 3.2}) {
    for (int k = 0; k <= 21; ++k) {
      double quad = kernel_coefficient_tabulated(
          [T](double t) { return nu_time(T, t); }, T, k, 200000);
      REQUIRE(std::abs(nu_hat_triangular(T, k) - quad) < 1e-8);
    }
  }
}

TEST_CASE("cos|cos| kernel coefficients match their defining integrals") {
  for (double T : {kTwoPi, 3.2}) {
    for (int k = 1; k <= 21; ++k) {
      double quad = kernel_coefficient_tabulated(
          [T](double t) { return g_time(T, t); }, T, k, 200000);
      REQUIRE(std::abs(g_hat_cosabs(T, k) - quad) < 1e-8);
    }
  }
}

TEST_CASE("closed-form coefficient values at T = 2 pi") {
  double T = kTwoPi;
  REQUIRE(nu_hat_triangular(T, 0) == Catch::Approx(T * T / 4.0).epsilon(1e-14));
  REQUIRE(nu_hat_triangular(T, 1) == Catch::Approx(-2.0).epsilon(1e-14));
  REQUIRE(nu_hat_triangular(T, 3) == Catch::Approx(-2.0 / 9.0).epsilon(1e-14));
  REQUIRE(nu_hat_triangular(T, 2) == 0.0);
  REQUIRE(g_hat_cosabs(T, 1) == Catch::Approx(8.0 / 3.0).epsilon(1e-14));
  REQUIRE(g_hat_cosabs(T, 3) == Catch::Approx(8.0 / 15.0).epsilon(1e-14));
  REQUIRE(g_hat_cosabs(T, 2) == 0.0);
  REQUIRE(g_hat_cosabs(T, 5) == Catch::Approx(-8.0 / 105.0).epsilon(1e-12));
}

TEST_CASE("kernel coefficients are even in k and real") {
  double T = kTwoPi;
  for (int k = 1; k <= 9; k += 2) {
    double im = 0;
    kernel_coefficient_tabulated([T](double t) { return nu_time(T, t); }, T, k, 20000,
                                 &im);
    REQUIRE(std::abs(im) < 1e-9);
    KernelCoefficients kc = kernel_coefficients_analytic(T, 27, {});
    REQUIRE(kc.nhat(-k) == kc.nhat(k));
  }
}

TEST_CASE("coefficient decay exponents") {
  double T = kTwoPi;
  // |nu_hat_k| k^2 is exactly constant for the triangular kernel
  for (int k = 1; k <= 27; k += 2)
    REQUIRE(std::abs(nu_hat_triangular(T, k)) * k * k ==
            Catch::Approx(T * T / (2.0 * std::numbers::pi * std::numbers::pi))
                .epsilon(1e-13));
  // the empirical fit on the tabulated table recovers alpha ~ 2
  KernelCoefficients kc = kernel_coefficients_tabulated(
      [T](double t) { return nu_time(T, t); }, nullptr, T, 27, {}, 20000);
  REQUIRE(kc.alpha == Catch::Approx(2.0).margin(0.05));
  // g-factor decays one power faster than nu
  double r9 = std::abs(g_hat_cosabs(T, 9)) / std::abs(nu_hat_triangular(T, 9));
  double r3 = std::abs(g_hat_cosabs(T, 3)) / std::abs(nu_hat_triangular(T, 3));
  REQUIRE(r9 < r3);
}

TEST_CASE("quarter-wave cell realizes the design phases") {
  double T = kTwoPi;
  StepWeight w = step_weight_thm12(T, 1.0, 0.25, 1.0);
  double V1 = w.cell.pieces[0].second;
  double V2 = w.cell.pieces[1].second;
  REQUIRE(V1 == Catch::Approx(4.0 * std::numbers::pi * std::numbers::pi).epsilon(1e-14));
  REQUIRE(V2 ==
          Catch::Approx(4.0 * std::numbers::pi * std::numbers::pi / 9.0).epsilon(1e-14));
  // both pieces contribute a quarter-period phase
  REQUIRE(std::sqrt(V1) * 0.25 * 1.0 == Catch::Approx(T / 4.0).epsilon(1e-14));
  REQUIRE(std::sqrt(V2) * 0.75 * 1.0 == Catch::Approx(T / 4.0).epsilon(1e-14));
  REQUIRE(w.phase_check == Catch::Approx(T / 4.0).epsilon(1e-14));
}

TEST_CASE("theta = 1/2 is rejected as gapless") {
  REQUIRE_THROWS_AS(step_weight_thm12(kTwoPi, 1.0, 0.5, 1.0), ConfigError);
  REQUIRE_THROWS_AS(step_weight_thm12(kTwoPi, 1.0, 0.0, 1.0), ConfigError);
  REQUIRE_THROWS_AS(step_weight_thm12(kTwoPi, 1.0, 1.0, 1.0), ConfigError);
}

TEST_CASE("half-space weight validates its parameter ranges") {
  REQUIRE_NOTHROW(step_weight_halfspace(kTwoPi, 1.0, 0.25, 1.0, 1.0 / 3.0, 1.2));
  // thetas must lie strictly inside (0, 1/2)
  REQUIRE_THROWS_AS(step_weight_halfspace(kTwoPi, 1.0, 0.6, 1.0, 0.25, 1.2), ConfigError);
  REQUIRE_THROWS_AS(step_weight_halfspace(kTwoPi, 1.0, 0.25, 1.0, 0.5, 1.2), ConfigError);
  StepWeight w = step_weight_halfspace(kTwoPi, 1.0, 0.25, 1.0, 1.0 / 3.0, 1.2);
  REQUIRE(w.halfspace);
  // the two sides carry different cells
  REQUIRE(w.left.pieces[0].second != w.right.pieces[0].second);
  REQUIRE(w.value(-0.1) != w.value(0.1));
}

TEST_CASE("custom step weights fold the baseline and validate geometry") {
  // c = 2 gives baseline 1 - 1/4 = 3/4
  StepWeight w = step_weight_custom({{0.5, 1.0}, {0.5, 2.0}}, 1.0, 2.0);
  REQUIRE(w.baseline == Catch::Approx(0.75).epsilon(1e-15));
  REQUIRE(w.value(0.25) == Catch::Approx(1.75).epsilon(1e-15));
  REQUIRE(w.value(0.75) == Catch::Approx(2.75).epsilon(1e-15));
  // periodic continuation
  REQUIRE(w.value(5.25) == Catch::Approx(1.75).epsilon(1e-15));
  REQUIRE(w.value(-0.75) == Catch::Approx(1.75).epsilon(1e-12));
  // jump nodes take the mean of the side limits
  REQUIRE(w.value(0.5) == Catch::Approx(0.75 + 1.5).epsilon(1e-12));

  REQUIRE_THROWS_AS(step_weight_custom({{0.5, 1.0}}, 1.0, 1.0), ConfigError);   // length sum
  REQUIRE_THROWS_AS(step_weight_custom({{1.0, -2.0}}, 1.0, 1.0), ConfigError);  // V <= 0
  REQUIRE_THROWS_AS(step_weight_custom({}, 1.0, 1.0), ConfigError);
}

TEST_CASE("sampling refuses nonpositive weights") {
  StepWeight w = step_weight_custom({{1.0, 0.5}}, 1.0, 1.0);  // V = 0.5 everywhere
  SpaceGrid g = make_grid(0.0, 4.0, 41);
  REQUIRE_NOTHROW(w.sample(g));
  StepWeight bad = w;
  bad.baseline = -0.5;  // forces V = 0
  REQUIRE_THROWS_AS(bad.sample(g), ConfigError);
}

TEST_CASE("nonlinear weight construction enforces positivity and split consistency") {
  REQUIRE_THROWS_AS(make_nonlinear_weight({1.0, -1.0, 1.0}, 1), ConfigError);
  REQUIRE_THROWS_AS(make_nonlinear_weight({1.0, 1.0}, 0), ConfigError);
  NonlinearWeight w = make_nonlinear_weight({2.0, 2.0}, -1);
  REQUIRE(w.sign == -1);
  REQUIRE_FALSE(w.has_split());
  // split parts must sum to h
  REQUIRE_NOTHROW(make_nonlinear_weight({2.0, 2.0}, 1, {1.5, 1.5}, {0.5, 0.5}));
  REQUIRE_THROWS_AS(make_nonlinear_weight({2.0, 2.0}, 1, {1.5, 1.5}, {0.6, 0.5}),
                    ConfigError);
  REQUIRE_THROWS_AS(make_nonlinear_weight({2.0, 2.0}, 1, {2.5, 2.5}, {-0.5, -0.5}),
                    ConfigError);
}

TEST_CASE("tabulated kernel path rejects an uneven kernel") {
  double T = kTwoPi;
  // sin is odd about the period midpoint: imaginary coefficients appear
  REQUIRE_THROWS_AS(kernel_coefficients_tabulated(
                        [T](double t) { return std::sin(kTwoPi / T * t); }, nullptr, T, 3,
                        {}, 20000),
                    ConfigError);
}
