#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "breather/dual_solver.hpp"

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

// quarter-wave medium on a short domain aligned with the cell steps
Fixture make_fixture(int n, int k_max, int m, double g1, int sign,
                     double h0 = 0.456301) {
  Fixture fx;
  fx.grid = make_grid(-1.375, 1.625, n);
  fx.lat = make_lattice(kTwoPi, k_max, m);
  StepWeight w = step_weight_thm12(kTwoPi, 1.0, 0.25, 1.0);
  fx.V = w.sample(fx.grid);
  std::vector<double> prof;
  if (g1 > 0) prof.assign(n, g1);
  fx.kc = kernel_coefficients_analytic(kTwoPi, 3 * k_max, prof);
  fx.weight = make_nonlinear_weight(std::vector<double>(n, h0), sign);
  fx.op = build_effective_operator(fx.grid, fx.lat, fx.V, fx.kc, fx.weight);
  return fx;
}

Field random_ext(const Fixture& fx, std::mt19937& rng) {
  Field f = make_field(fx.lat.ext, fx.grid.n_points);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& z : f.re) z = d(rng);
  for (auto& z : f.im) z = d(rng);
  return f;
}

void check_critical_point(const MountainPassResult& r, const SolverParams& p) {
  REQUIRE(r.state.converged);
  REQUIRE(r.state.grad_rel <= p.tol_grad);
  REQUIRE(r.state.primal_rel <= p.tol_grad);
  REQUIRE(r.state.id_gap <= p.tol_id);
  REQUIRE(r.state.J > 0);
  // the critical level sits between the certified lower bound and the
  // deformed-path upper route
  REQUIRE(r.lower_bound > 0);
  REQUIRE(r.lower_bound <= r.state.J * (1 + 1e-9));
  REQUIRE(r.level >= r.state.J * (1 - 1e-9));
  REQUIRE((r.level >= r.path_level * (1 - 1e-9) || r.level == r.state.J));
  REQUIRE_FALSE(r.trace.empty());
}
}  // namespace

TEST_CASE("functional vanishes at the origin and scales with the weight") {
  Fixture fx = make_fixture(361, 3, 1, 0.456301, 1);
  SolverParams p;
  int n_t = solver_nt(fx.op, p);

  Field z = make_field(fx.lat.ext, fx.grid.n_points);
  JEval e0 = eval_J(fx.op, z, n_t);
  REQUIRE(e0.J == 0.0);
  REQUIRE(e0.q == 0.0);
  REQUIRE(e0.b == 0.0);

  // J_{c h}(c^{-3/4} v) = J_h(v) / c holds exactly at fixed collocation
  Fixture fc = make_fixture(361, 3, 1, 0.456301, 1, 3.0 * 0.456301);
  std::mt19937 rng(5);
  Field v = random_ext(fx, rng);
  double J1 = eval_J_value(fx.op, v, n_t);
  Field vs = v;
  scal(vs, std::pow(3.0, -0.75));
  double J3 = eval_J_value(fc.op, vs, n_t);
  REQUIRE(J3 == Catch::Approx(J1 / 3.0).epsilon(1e-12));
}

TEST_CASE("gradient field is the exact derivative of the discrete functional") {
  Fixture fx = make_fixture(161, 5, 1, 0.456301, 1);
  SolverParams p;
  int n_t = solver_nt(fx.op, p);
  std::mt19937 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Field v = random_ext(fx, rng);
    Field dir = random_ext(fx, rng);
    JEval e = eval_J(fx.op, v, n_t);
    double lhs = inner_product_l2(e.grad, dir, fx.grid);
    double eps = 1e-6;
    Field vp = lincomb(1.0, v, eps, dir);
    Field vm = lincomb(1.0, v, -eps, dir);
    double fd =
        (eval_J_value(fx.op, vp, n_t) - eval_J_value(fx.op, vm, n_t)) / (2 * eps);
    REQUIRE(std::abs(fd - lhs) / std::max(1.0, std::abs(fd)) <= 1e-5);
  }
}

TEST_CASE("anchor sits on the ray maximum with a negative-level endpoint") {
  Fixture fx = make_fixture(361, 3, 1, 0.456301, 1);
  SolverParams p;
  int n_t = solver_nt(fx.op, p);
  Anchor an = find_anchor(fx.op, p);
  double jplus = eval_J_value(fx.op, an.v_plus, n_t);
  REQUIRE(jplus > 0);
  REQUIRE(jplus == Catch::Approx(an.a / 4.0).epsilon(1e-10));
  REQUIRE(eval_J_value(fx.op, an.endpoint, n_t) <= 0.0);
  REQUIRE_FALSE(an.mode_lambdas.empty());
}

TEST_CASE("dual and primal variables convert both ways") {
  Fixture fx = make_fixture(361, 3, 1, 0.456301, 1);
  SolverParams p;
  int n_t = solver_nt(fx.op, p);
  std::mt19937 rng(17);
  Field u = make_field(fx.lat.active, fx.grid.n_points);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& z : u.re) z = d(rng);
  for (auto& z : u.im) z = d(rng);
  Field v = dual_from_u(fx.op, u, n_t);
  Field back = primal_from_v(fx.op, v, n_t);
  // (h^{3/4} u^3)^{1/3} / h^{1/4} = u; the cube is fully resolved at n_t
  for (std::size_t i = 0; i < u.re.size(); ++i) {
    REQUIRE(back.re[i] == Catch::Approx(u.re[i]).margin(1e-11));
    REQUIRE(back.im[i] == Catch::Approx(u.im[i]).margin(1e-11));
  }
}

TEST_CASE("mountain pass finds the ground state of the short domain") {
  Fixture fx = make_fixture(361, 3, 1, 0.0, 1);
  SolverParams p;
  MountainPassResult r = mountain_pass_search(fx.op, p);
  check_critical_point(r, p);
  REQUIRE(r.state.J == Catch::Approx(16.1135518851).epsilon(1e-7));
  REQUIRE(r.min_period == Catch::Approx(kTwoPi).epsilon(1e-12));
}

TEST_CASE("retarded kernel shifts the level upward, solution still converges") {
  Fixture fx = make_fixture(361, 3, 1, 0.456301, 1);
  SolverParams p;
  MountainPassResult r = mountain_pass_search(fx.op, p);
  check_critical_point(r, p);
  REQUIRE(r.state.J == Catch::Approx(19.0962016812).epsilon(1e-7));
}

TEST_CASE("sublattice search returns a shorter minimal period") {
  Fixture fx = make_fixture(361, 9, 3, 0.456301, 1);
  SolverParams p;
  MountainPassResult r = mountain_pass_search(fx.op, p);
  check_critical_point(r, p);
  REQUIRE(r.state.J == Catch::Approx(30.3574646874).epsilon(1e-7));
  REQUIRE(r.min_period == Catch::Approx(kTwoPi / 3.0).epsilon(1e-12));
  // every carried mass sits on multiples of 3
  for (auto& [k, m] : r.masses)
    if (m > 1e-8) REQUIRE(k % 3 == 0);
}

TEST_CASE("negated transform handles the defocusing weight") {
  Fixture fx = make_fixture(361, 3, 1, 0.456301, -1);
  SolverParams p;
  MountainPassResult r = mountain_pass_search(fx.op, p);
  check_critical_point(r, p);
  REQUIRE(r.state.J == Catch::Approx(5.96646090435).epsilon(1e-7));
}

TEST_CASE("repeated searches are bit-identical") {
  Fixture a = make_fixture(361, 3, 1, 0.456301, 1);
  Fixture b = make_fixture(361, 3, 1, 0.456301, 1);
  SolverParams p;
  MountainPassResult ra = mountain_pass_search(a.op, p);
  MountainPassResult rb = mountain_pass_search(b.op, p);
  REQUIRE(ra.state.J == rb.state.J);
  REQUIRE(ra.state.u.re == rb.state.u.re);
  REQUIRE(ra.state.u.im == rb.state.u.im);
  REQUIRE(ra.state.v.re == rb.state.v.re);
  REQUIRE(ra.level == rb.level);
}

TEST_CASE("candidate ranking prefers the smaller worst residual, then level") {
  DualState a, b;
  a.converged = b.converged = true;
  a.grad_rel = 1e-9;
  a.primal_rel = 1e-13;  // worst 1e-9
  b.grad_rel = 1e-10;
  b.primal_rel = 1e-6;  // worst 1e-6
  REQUIRE(better_state(a, b));
  REQUIRE_FALSE(better_state(b, a));
  // converged beats unconverged regardless of residuals
  b.converged = false;
  b.grad_rel = b.primal_rel = 1e-15;
  REQUIRE(better_state(a, b));
  // at equal residuals the lower level wins
  DualState c = a, d = a;
  c.J = 1.0;
  d.J = 2.0;
  REQUIRE(better_state(c, d));
  REQUIRE_FALSE(better_state(d, c));
}

TEST_CASE("minimal period detects the carried frequency support") {
  SpaceGrid grid = make_grid(0.0, 1.0, 9);
  Field f = make_field({1, 3, 9}, grid.n_points);
  for (int i = 0; i < grid.n_points; ++i) f.cre(1, i) = 1.0;  // k = 3 only
  REQUIRE(minimal_period(f, grid, kTwoPi) == Catch::Approx(kTwoPi / 3.0));
  for (int i = 0; i < grid.n_points; ++i) f.cre(2, i) = 0.5;  // add k = 9
  REQUIRE(minimal_period(f, grid, kTwoPi) == Catch::Approx(kTwoPi / 3.0));
  for (int i = 0; i < grid.n_points; ++i) f.cre(0, i) = 0.1;  // add k = 1
  REQUIRE(minimal_period(f, grid, kTwoPi) == Catch::Approx(kTwoPi));
}

TEST_CASE("primal residual separates a polished root from a stationary iterate") {
  Fixture fx = make_fixture(361, 3, 1, 0.456301, 1);
  SolverParams p;
  MountainPassResult r = mountain_pass_search(fx.op, p);
  double at_root = primal_residual(fx.op, r.state.u, solver_nt(fx.op, p));
  REQUIRE(at_root <= 1e-10);
  Field off = r.state.u;
  scal(off, 1.0 + 1e-4);
  REQUIRE(primal_residual(fx.op, off, solver_nt(fx.op, p)) > 10 * at_root);
}
