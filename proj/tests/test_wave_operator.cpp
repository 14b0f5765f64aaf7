#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "breather/wave_operator.hpp"

using namespace breather;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Fixture {
  SpaceGrid grid;
  FrequencyLattice lat;
  std::vector<double> V;
  KernelCoefficients kc;
  NonlinearWeight weight;
  EffectiveOperator op;
};

// quarter-wave medium with the retarded kernel active, scaled so the
// retarded part stays well below the V-only part
Fixture make_standard(int n, double x_min, double dx, int k_max, double g1 = 0.456301,
                      int sign = 1) {
  Fixture fx;
  fx.grid = make_grid(x_min, x_min + (n - 1) * dx, n);
  fx.lat = make_lattice(kTwoPi, k_max, 1);
  StepWeight w = step_weight_thm12(kTwoPi, 1.0, 0.25, 1.0);
  fx.V = w.sample(fx.grid);
  std::vector<double> prof(n, g1);
  fx.kc = kernel_coefficients_analytic(kTwoPi, 3 * k_max, g1 > 0 ? prof : std::vector<double>{});
  fx.weight = make_nonlinear_weight(std::vector<double>(n, 0.456301), sign);
  fx.op = build_effective_operator(fx.grid, fx.lat, fx.V, fx.kc, fx.weight);
  return fx;
}

Fixture make_constant_v(int n, double V0, int k_max) {
  Fixture fx;
  fx.grid = make_grid(0.0, 2.0, n);
  fx.lat = make_lattice(kTwoPi, k_max, 1);
  fx.V.assign(n, V0);
  fx.kc = kernel_coefficients_analytic(kTwoPi, 3 * k_max, {});
  fx.weight = make_nonlinear_weight(std::vector<double>(n, 1.0), 1);
  fx.op = build_effective_operator(fx.grid, fx.lat, fx.V, fx.kc, fx.weight);
  return fx;
}

Field random_active(const Fixture& fx, unsigned seed, bool zero_boundary = true) {
  Field f = make_field(fx.lat.active, fx.grid.n_points);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& v : f.re) v = d(rng);
  for (auto& v : f.im) v = d(rng);
  if (zero_boundary)
    for (int ik = 0; ik < f.nk(); ++ik) {
      f.cre(ik, 0) = f.cim(ik, 0) = 0;
      f.cre(ik, f.nx - 1) = f.cim(ik, f.nx - 1) = 0;
    }
  return f;
}
}  // namespace

TEST_CASE("blockwise action matches the discrete sine eigenpairs") {
  // constant V: the Dirichlet blocks diagonalize in discrete sine modes with
  // eigenvalue (2 - 2 cos(n pi dx / L)) / dx^2 - k^2 V, scaled by s_k
  Fixture fx = make_constant_v(41, 0.7, 3);
  double L = fx.grid.x_max - fx.grid.x_min;
  int ni = fx.grid.n_points - 2;
  for (int mode : {1, 2, 5}) {
    Field f = make_field(fx.lat.active, fx.grid.n_points);
    for (int i = 1; i <= ni; ++i)
      for (int ik = 0; ik < f.nk(); ++ik)
        f.cre(ik, i) = std::sin(mode * std::numbers::pi * (fx.grid.x[i] - fx.grid.x_min) / L);
    Field g = apply_W(fx.op, f);
    for (int ik = 0; ik < f.nk(); ++ik) {
      int k = fx.lat.active[ik];
      double mu = (2.0 - 2.0 * std::cos(mode * std::numbers::pi * fx.grid.dx / L)) /
                      (fx.grid.dx * fx.grid.dx) -
                  double(k) * k * 0.7;
      double expected = fx.op.s_k.at(k) * mu;
      for (int i = 1; i <= ni; ++i)
        REQUIRE(g.cre(ik, i) == Catch::Approx(expected * f.cre(ik, i)).margin(
                                    1e-10 * std::abs(expected)));
    }
  }
}

TEST_CASE("frequency multipliers take their closed-form values") {
  Fixture fx = make_standard(128, -1.375, 1.0 / 32.0, 5);
  // s_k = 1 / (omega^2 k^2 nu_k) = -1/2 for every odd k at this period
  for (int k : fx.lat.active)
    REQUIRE(fx.op.s_k.at(k) == Catch::Approx(-0.5).epsilon(1e-14));
  // h^{1/4} folds the nonlinear weight magnitude
  REQUIRE(fx.op.h4[3] == Catch::Approx(std::pow(0.456301, 0.25)).epsilon(1e-14));
}

TEST_CASE("W is symmetric and splits into V-only and retarded parts") {
  Fixture fx = make_standard(512, -1.375, 1.0 / 128.0, 7);
  Field f = random_active(fx, 21);
  Field g = random_active(fx, 22);
  double fg = inner_product_l2(apply_W(fx.op, f), g, fx.grid);
  double gf = inner_product_l2(f, apply_W(fx.op, g), fx.grid);
  REQUIRE(std::abs(fg - gf) <= 1e-12 * std::max(std::abs(fg), 1.0));

  Field w = apply_W(fx.op, f);
  Field w0 = apply_W0(fx.op, f);
  Field w1 = apply_W1(fx.op, f);
  Field sum = lincomb(1.0, w0, 1.0, w1);
  for (std::size_t i = 0; i < w.re.size(); ++i) {
    REQUIRE(sum.re[i] == Catch::Approx(w.re[i]).margin(1e-12));
    REQUIRE(sum.im[i] == Catch::Approx(w.im[i]).margin(1e-12));
  }
}

TEST_CASE("solve then apply returns the input") {
  Fixture fx = make_standard(512, -1.375, 1.0 / 128.0, 7);
  Field f = random_active(fx, 33);
  Field x = solve_W(fx.op, f);
  Field back = apply_W(fx.op, x);
  double num = field_norm(lincomb(1.0, back, -1.0, f), fx.grid);
  double den = field_norm(f, fx.grid);
  REQUIRE(num / den <= 1e-11);
}

TEST_CASE("conditioning gate refuses a singular block") {
  Fixture fx = make_standard(128, -1.375, 1.0 / 32.0, 5);
  Field f = random_active(fx, 3);
  REQUIRE_THROWS_MATCHES(solve_W(fx.op, f, 1.0), SolverError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("singular")));
}

TEST_CASE("retarded-to-static ratio is small and matches a dense oracle") {
  // the estimate must agree with a dense singular value computation
  Fixture fx = make_standard(64, -1.375, 1.0 / 16.0, 3);
  W1Estimate est = estimate_W1_norm(fx.op);
  REQUIRE(est.converged);
  REQUIRE_FALSE(est.skipped);

  double best = 0;
  int ni = fx.op.ni();
  for (int k : fx.lat.active) {
    // W1 W0^{-1} = D A0^{-1}: the s_k scaling cancels between the factors
    Eigen::MatrixXd A0 = Eigen::MatrixXd::Zero(ni, ni);
    const Tridiag& t = fx.op.A0.at(k);
    for (int i = 0; i < ni; ++i) {
      A0(i, i) = t.diag[i];
      if (i + 1 < ni) {
        A0(i, i + 1) = t.off[i];
        A0(i + 1, i) = t.off[i];
      }
    }
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(ni, ni);
    double w2k2 = fx.lat.omega * fx.lat.omega * k * k;
    for (int i = 0; i < ni; ++i)
      D(i, i) = -w2k2 * fx.kc.ghat(k, i + 1);
    Eigen::MatrixXd M = D * A0.inverse();
    double sigma = M.jacobiSvd().singularValues()(0);
    best = std::max(best, sigma);
  }
  REQUIRE(est.sigma == Catch::Approx(best).margin(1e-8));
  REQUIRE(est.sigma < 1.0);
}

TEST_CASE("retarded ratio vanishes exactly without a retarded profile") {
  Fixture fx = make_standard(64, -1.375, 1.0 / 16.0, 3, 0.0);
  W1Estimate est = estimate_W1_norm(fx.op);
  REQUIRE(est.sigma == 0.0);
  REQUIRE(est.converged);
}

TEST_CASE("oversized interiors are guarded unless overridden") {
  Fixture fx = make_standard(1700, -1.375, 1.0 / 256.0, 3);
  W1Estimate est = estimate_W1_norm(fx.op);
  REQUIRE(est.skipped);
  REQUIRE_FALSE(est.note.empty());
}

TEST_CASE("witness fields bracket the spectral point with opposite signs") {
  Fixture fx = make_standard(512, -1.375, 1.0 / 128.0, 7);
  for (int k : {1, 3, 5, 7}) {
    WitnessPair wp = witness_fields(fx.op, k);
    double qb = inner_product_l2(wp.below, apply_W(fx.op, wp.below), fx.grid);
    double qa = inner_product_l2(wp.above, apply_W(fx.op, wp.above), fx.grid);
    INFO("k=" << k << " below=" << qb << " above=" << qa);
    REQUIRE(qb * qa < 0.0);
    REQUIRE(wp.lambda_below < fx.lat.omega * fx.lat.omega * k * k);
    REQUIRE(wp.lambda_above > fx.lat.omega * fx.lat.omega * k * k);
  }
  REQUIRE_THROWS_AS(witness_fields(fx.op, 2), UsageError);
}

TEST_CASE("K inherits symmetry from the resolvent") {
  Fixture fx = make_standard(128, -1.375, 1.0 / 32.0, 5);
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  auto random_ext = [&](unsigned) {
    Field f = make_field(fx.lat.ext, fx.grid.n_points);
    for (auto& v : f.re) v = d(rng);
    for (auto& v : f.im) v = d(rng);
    for (int ik = 0; ik < f.nk(); ++ik) {
      f.cre(ik, 0) = f.cim(ik, 0) = 0;
      f.cre(ik, f.nx - 1) = f.cim(ik, f.nx - 1) = 0;
    }
    return f;
  };
  Field v = random_ext(1), w = random_ext(2);
  double a = inner_product_l2(apply_K(fx.op, v), w, fx.grid);
  double b = inner_product_l2(v, apply_K(fx.op, w), fx.grid);
  REQUIRE(a == Catch::Approx(b).epsilon(1e-10));
  // K annihilates the non-active frequencies of its argument
  Field tail = make_field(fx.lat.ext, fx.grid.n_points);
  for (int ik = 0; ik < tail.nk(); ++ik)
    if (tail.ks[ik] > fx.lat.k_max)
      for (int i = 0; i < tail.nx; ++i) tail.cre(ik, i) = 1.0;
  REQUIRE(field_norm(apply_K(fx.op, tail), fx.grid) == 0.0);
}

TEST_CASE("operator construction validates input sizes") {
  Fixture fx = make_constant_v(41, 0.7, 3);
  std::vector<double> shortV(40, 0.7);
  REQUIRE_THROWS_AS(
      build_effective_operator(fx.grid, fx.lat, shortV, fx.kc, fx.weight), ConfigError);
  NonlinearWeight shortH = make_nonlinear_weight(std::vector<double>(40, 1.0), 1);
  REQUIRE_THROWS_AS(build_effective_operator(fx.grid, fx.lat, fx.V, fx.kc, shortH),
                    ConfigError);
}
