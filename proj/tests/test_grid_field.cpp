#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "breather/grid.hpp"
#include "breather/report.hpp"

using namespace breather;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

Field random_field(const std::vector<int>& ks, int nx, unsigned seed) {
  Field f = make_field(ks, nx);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& v : f.re) v = d(rng);
  for (auto& v : f.im) v = d(rng);
  return f;
}
}  // namespace

TEST_CASE("collocation round trip is exact for resolved frequencies") {
  FrequencyLattice lat = make_lattice(kTwoPi, 9, 1);
  Field f = random_field(lat.ext, 17, 42);
  Collocation c = make_collocation(lat.ext, kTwoPi, 61);
  std::vector<double> t = to_time(f, c);
  Field g = to_coef(t, f.nx, c);
  for (std::size_t i = 0; i < f.re.size(); ++i) {
    REQUIRE(f.re[i] == Catch::Approx(g.re[i]).margin(1e-13));
    REQUIRE(f.im[i] == Catch::Approx(g.im[i]).margin(1e-13));
  }
  REQUIRE_THROWS_AS(make_collocation(lat.ext, kTwoPi, 2 * 27), UsageError);
}

TEST_CASE("coefficient norm agrees with the time-domain average") {
  SpaceGrid grid = make_grid(-1.0, 2.0, 31);
  std::vector<int> ks{1, 3, 5};
  Field f = random_field(ks, grid.n_points, 7);
  double n2 = inner_product_l2(f, f, grid);

  // rectangle rule in t is exact for trig polynomials below the sample rate
  int n_t = 16;
  std::vector<double> w = evaluate_field(f, kTwoPi, n_t);
  double acc = 0;
  for (int i = 0; i < grid.n_points; ++i) {
    double s = 0;
    for (int j = 0; j < n_t; ++j) s += w[i * n_t + j] * w[i * n_t + j];
    acc += grid.wq[i] * s / n_t;
  }
  REQUIRE(acc == Catch::Approx(n2).epsilon(1e-12));
  REQUIRE(field_norm(f, grid) == Catch::Approx(std::sqrt(n2)).epsilon(1e-14));
}

TEST_CASE("pointwise cube reproduces the trigonometric identity") {
  // a single mode a cos(t) cubes to (3 a^3/4) cos t + (a^3/4) cos 3t; in the
  // half-coefficient convention re_1 = a => cube has re_1 = 3 a^3, re_3 = a^3
  SpaceGrid grid = make_grid(0.0, 1.0, 9);
  Field f = make_field({1, 3}, grid.n_points);
  for (int i = 0; i < grid.n_points; ++i) f.re[i] = 0.3 + 0.1 * grid.x[i];
  Field cube = pointwise_cube(f, kTwoPi, {1, 3, 5, 9}, 64);
  for (int i = 0; i < grid.n_points; ++i) {
    double a = f.cre(0, i);
    REQUIRE(cube.cre(0, i) == Catch::Approx(3 * a * a * a).margin(1e-14));
    REQUIRE(cube.cre(1, i) == Catch::Approx(a * a * a).margin(1e-14));
    REQUIRE(std::abs(cube.cre(2, i)) < 1e-14);  // k = 5 empty
    REQUIRE(std::abs(cube.cim(0, i)) < 1e-14);
  }
  // cube refuses an aliased collocation
  REQUIRE_THROWS_AS(pointwise_cube(f, kTwoPi, {1, 3, 5, 9}, 8), UsageError);
}

TEST_CASE("cube root inverts the cube on positive-amplitude fields") {
  SpaceGrid grid = make_grid(0.0, 1.0, 5);
  std::vector<int> ks{1, 3};
  Field f = random_field(ks, grid.n_points, 3);
  Field cube = pointwise_cube(f, kTwoPi, {1, 3, 5, 7, 9}, 96);
  // the cube is exactly bandlimited to 3 k_max, so the pointwise cube root
  // recovers the original samples and the projection is exact
  Field back = pointwise_cbrt(cube, kTwoPi, ks, 96);
  for (std::size_t i = 0; i < f.re.size(); ++i)
    REQUIRE(back.re[i] == Catch::Approx(f.re[i]).margin(1e-12));
}

TEST_CASE("q-norm scales with the 4/3 power") {
  SpaceGrid grid = make_grid(-1.0, 1.0, 21);
  Field f = random_field({1, 3}, grid.n_points, 11);
  double q1 = q43_norm(f, grid, kTwoPi, 97);
  Field g = f;
  scal(g, 8.0);
  double q8 = q43_norm(g, grid, kTwoPi, 97);
  REQUIRE(q8 == Catch::Approx(std::pow(8.0, 4.0 / 3.0) * q1).epsilon(1e-13));
  // and refines to a stable value once the collocation resolves the kinks
  double qa = q43_norm(f, grid, kTwoPi, 301);
  double qb = q43_norm(f, grid, kTwoPi, 601);
  REQUIRE(qa == Catch::Approx(qb).epsilon(1e-5));
}

TEST_CASE("embedding and restriction move between frequency sets") {
  SpaceGrid grid = make_grid(0.0, 1.0, 7);
  Field f = random_field({1, 3}, grid.n_points, 5);
  Field e = embed(f, {1, 3, 5, 7});
  REQUIRE(e.nk() == 4);
  for (int i = 0; i < f.nx; ++i) {
    REQUIRE(e.cre(0, i) == f.cre(0, i));
    REQUIRE(e.cre(1, i) == f.cre(1, i));
    REQUIRE(e.cre(2, i) == 0.0);
    REQUIRE(e.cre(3, i) == 0.0);
  }
  Field r = restrict_to(e, {1, 3});
  for (std::size_t i = 0; i < f.re.size(); ++i) REQUIRE(r.re[i] == f.re[i]);
  // embedding must carry every source frequency
  REQUIRE_THROWS_AS(embed(f, {1, 5}), UsageError);
}

TEST_CASE("mode masses isolate per-frequency content") {
  SpaceGrid grid = make_grid(0.0, 2.0, 41);
  Field f = make_field({1, 3}, grid.n_points);
  for (int i = 0; i < grid.n_points; ++i) f.re[i] = 0.5;  // k = 1 only
  auto m = mode_masses(f, grid);
  // mass_1 = sqrt(2 * sum wq * 0.25) = 0.5 sqrt(2 L), L = 2
  REQUIRE(m[1] == Catch::Approx(0.5 * std::sqrt(4.0)).epsilon(1e-13));
  REQUIRE(m[3] == 0.0);
}

TEST_CASE("frequency multiplier applies its symbol per mode") {
  SpaceGrid grid = make_grid(0.0, 1.0, 5);
  Field f = random_field({1, 3}, grid.n_points, 9);
  MultiplierSymbol s;
  s.values[1] = {2.0, 0.0};
  s.values[3] = {0.0, -0.5};  // rotate mode 3 by -i/2
  Field g = apply_multiplier(f, s);
  for (int i = 0; i < f.nx; ++i) {
    REQUIRE(g.cre(0, i) == Catch::Approx(2.0 * f.cre(0, i)).margin(1e-15));
    REQUIRE(g.cre(1, i) == Catch::Approx(0.5 * f.cim(1, i)).margin(1e-15));
    REQUIRE(g.cim(1, i) == Catch::Approx(-0.5 * f.cre(1, i)).margin(1e-15));
  }
  MultiplierSymbol incomplete;
  incomplete.values[1] = {1.0, 0.0};
  REQUIRE_THROWS_AS(apply_multiplier(f, incomplete), ConfigError);
}

TEST_CASE("coefficient files survive a write/read round trip") {
  SpaceGrid grid = make_grid(-0.5, 1.5, 11);
  FrequencyLattice lat = make_lattice(kTwoPi, 3, 1);
  Field f = random_field(lat.active, grid.n_points, 13);
  std::string path = "roundtrip_field.csv";
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  REQUIRE(fp != nullptr);
  write_field_csv(fp, f, grid, lat, "deadbeef01234567", "1.0.0", "u");
  std::fclose(fp);

  StoredField sf = read_field_csv(path);
  REQUIRE(sf.name == "u");
  REQUIRE(sf.T == kTwoPi);
  REQUIRE(sf.k_max == 3);
  REQUIRE(sf.n_points == grid.n_points);
  REQUIRE(sf.config == "deadbeef01234567");
  REQUIRE(sf.f.ks == f.ks);
  for (std::size_t i = 0; i < f.re.size(); ++i) {
    REQUIRE(sf.f.re[i] == f.re[i]);  // %.17g is lossless for doubles
    REQUIRE(sf.f.im[i] == f.im[i]);
  }
  std::remove(path.c_str());
}

TEST_CASE("grid quadrature weights integrate linear functions exactly") {
  SpaceGrid g = make_grid(-1.0, 3.0, 33);
  double s0 = 0, s1 = 0;
  for (int i = 0; i < g.n_points; ++i) {
    s0 += g.wq[i];
    s1 += g.wq[i] * g.x[i];
  }
  REQUIRE(s0 == Catch::Approx(4.0).epsilon(1e-14));
  REQUIRE(s1 == Catch::Approx(4.0).epsilon(1e-13));  // integral of x over [-1,3]
  REQUIRE(g.dx == Catch::Approx(4.0 / 32.0).epsilon(1e-15));
}
