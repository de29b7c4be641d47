#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "npns/dynamics.hpp"
#include "test_support.hpp"

using namespace npns;
using npns::testing::max_abs;
using npns::testing::max_abs_diff;
using npns::testing::random_field;
using npns::testing::random_solenoidal;

namespace {

VectorField taylor_green(const Grid& g) {
  return VectorField(
      SpectralField::from_function(g, [](double x, double y) { return std::sin(x) * std::cos(y); }),
      SpectralField::from_function(g, [](double x, double y) { return -std::cos(x) * std::sin(y); }));
}

VectorField sin_y_force(const Grid& g) {
  VectorField f(g);
  f.x = SpectralField::from_function(g, [](double, double y) { return std::sin(y); });
  f.x.set_mean_free(true);
  f.y.set_mean_free(true);
  return f;
}

// Direct sum of c_k (i k_dir)^order exp(i k.x) at one point.
double eval_mode_sum(const SpectralField& f, double x, double y, int dir) {
  const Grid& g = f.grid();
  Complex s{};
  for (int a = 0; a < g.n(); ++a)
    for (int b = 0; b < g.n(); ++b) {
      Complex c = f.at(a, b) * std::polar(1.0, g.wavenumber(a) * x + g.wavenumber(b) * y);
      if (dir == 0) c *= Complex(0, g.wavenumber(a));
      if (dir == 1) c *= Complex(0, g.wavenumber(b));
      s += c;
    }
  return s.real();
}

double relative_gap(const StateDerivative& a, const StateDerivative& b) {
  return max_abs_diff(a.velocity.x, b.velocity.x) + max_abs_diff(a.velocity.y, b.velocity.y) +
         max_abs_diff(a.sigma, b.sigma) + max_abs_diff(a.rho, b.rho);
}

}  // namespace

TEST_CASE("trilinear form identities on random divergence-free triples") {
  Grid g(16);
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const VectorField u = random_solenoidal(g, g.cutoff(), rng);
    const VectorField v = random_solenoidal(g, g.cutoff(), rng);
    const VectorField w = random_solenoidal(g, g.cutoff(), rng);
    const double scale = norm_l2(u) * seminorm_h1(v) * norm_l2(w) + norm_l2(u) * seminorm_h1(w) * norm_l2(v);
    CHECK(std::abs(trilinear_b(u, v, v)) <= 1e-10 * scale);
    CHECK(std::abs(trilinear_b(u, v, w) + trilinear_b(u, w, v)) <= 1e-10 * scale);
  }
}

TEST_CASE("trilinear form matches direct quadrature") {
  Grid g(8);
  std::mt19937_64 rng(103);
  // Degree-2 factors: the integrand has degree <= 6 < 8, so collocation
  // quadrature with directly summed series is exact.
  const VectorField u = random_solenoidal(g, 2, rng);
  const VectorField v(random_field(g, 2, rng), random_field(g, 2, rng));
  const VectorField w(random_field(g, 2, rng), random_field(g, 2, rng));
  double quad = 0.0;
  const double h = g.spacing();
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const double x = i * h, y = j * h;
      const double u1 = eval_mode_sum(u.x, x, y, -1), u2 = eval_mode_sum(u.y, x, y, -1);
      const double c1 = u1 * eval_mode_sum(v.x, x, y, 0) + u2 * eval_mode_sum(v.x, x, y, 1);
      const double c2 = u1 * eval_mode_sum(v.y, x, y, 0) + u2 * eval_mode_sum(v.y, x, y, 1);
      quad += c1 * eval_mode_sum(w.x, x, y, -1) + c2 * eval_mode_sum(w.y, x, y, -1);
    }
  quad *= h * h;
  CHECK(trilinear_b(u, v, w) == doctest::Approx(quad).epsilon(1e-12));

  CHECK_THROWS(trilinear_b(u, VectorField(Grid(16)), w));
}

TEST_CASE("nonlinear term") {
  Grid g(16);
  CHECK(max_abs(nonlinear_term(VectorField(g)).x) == 0.0);

  // (u.grad)u = grad((cos^2 y + cos^2 x)/2 - 1/2)-type gradient for Taylor-Green.
  const VectorField tg = taylor_green(g);
  const VectorField btg = nonlinear_term(tg);
  CHECK(max_abs(btg.x) < 1e-10);
  CHECK(max_abs(btg.y) < 1e-10);

  std::mt19937_64 rng(107);
  for (int trial = 0; trial < 10; ++trial) {
    const VectorField u = random_solenoidal(g, 4, rng);
    const double scale = std::pow(norm_l2(u), 2) * seminorm_h1(u);
    CHECK(std::abs(inner(nonlinear_term(u), u)) <= 1e-10 * scale);
    CHECK(max_divergence_coeff(nonlinear_term(u)) <= 1e-12 * scale);
  }
}

TEST_CASE("migration term") {
  Grid g(8);
  std::mt19937_64 rng(109);
  const SpectralField phi = random_field(g, 1, rng);
  CHECK(max_abs(migration_term(SpectralField(g), phi, 1)) == 0.0);
  SpectralField constant_phi(g);
  constant_phi.set_mode(0, 0, 2.0);
  CHECK(max_abs(migration_term(random_field(g, 1, rng, false), constant_phi, 1)) == 0.0);

  SpectralField one(g);
  one.set_mode(0, 0, 1.0);
  SpectralField cosx(g);
  cosx.set_mode(1, 0, 0.5);
  CHECK(max_abs_diff(migration_term(one, cosx, 1), -1.0 * cosx) < 1e-15);
  CHECK(max_abs_diff(migration_term(one, cosx, -1), cosx) < 1e-15);

  // Product-rule oracle with modes low enough that no product leaves the band.
  const SpectralField c = random_field(g, 1, rng, false);
  const PhysicalField pc = to_physical(c);
  SpectralField expected = product(to_physical(partial(c, 0)), to_physical(partial(phi, 0)));
  expected += product(to_physical(partial(c, 1)), to_physical(partial(phi, 1)));
  expected += product(pc, to_physical(laplacian(phi)));
  CHECK(max_abs_diff(migration_term(c, phi, 1), expected) < 1e-10);
}

TEST_CASE("deterministic right-hand side") {
  Grid g(16);
  PhysicalParams params(g);
  params.nu = 0.7;

  NpnsState tg(taylor_green(g), SpectralField(g), SpectralField(g));
  const StateDerivative d = rhs_deterministic(tg, params);
  CHECK(max_abs_diff(d.velocity.x, -2.0 * params.nu * tg.velocity.x) < 1e-10);
  CHECK(max_abs_diff(d.velocity.y, -2.0 * params.nu * tg.velocity.y) < 1e-10);
  CHECK(max_abs(d.sigma) == 0.0);
  CHECK(max_abs(d.rho) == 0.0);

  PhysicalParams forced(1.0, 1.0, 1.0, sin_y_force(g));
  const StateDerivative df = rhs_deterministic(NpnsState(g), forced);
  CHECK(max_abs_diff(df.velocity.x, forced.force.x) == 0.0);
  CHECK(max_abs_diff(df.velocity.y, forced.force.y) == 0.0);

  NpnsState uniform(g);
  uniform.sigma.set_mode(0, 0, 0.8);
  const StateDerivative du = rhs_deterministic(uniform, params);
  CHECK(max_abs(du.velocity.x) + max_abs(du.velocity.y) + max_abs(du.sigma) + max_abs(du.rho) == 0.0);

  NpnsState wrong(g);
  wrong.gauge = Gauge::transformed;
  CHECK_THROWS(rhs_deterministic(wrong, params));
}

TEST_CASE("transformed right-hand side") {
  Grid g(16);
  std::mt19937_64 rng(113);
  PhysicalParams params(0.9, 0.6, 0.5, sin_y_force(g));
  NpnsState s(random_solenoidal(g, 4, rng), random_field(g, 4, rng, false), random_field(g, 4, rng));
  s.sigma.set_mode(0, 0, 3.0);

  NpnsState t = s;
  t.gauge = Gauge::transformed;
  const StateDerivative det = rhs_deterministic(s, params);
  const StateDerivative tr = rhs_transformed(t, params, 1.0);
  CHECK(relative_gap(det, tr) == 0.0);

  CHECK_THROWS(rhs_transformed(t, params, 0.0));
  CHECK_THROWS(rhs_transformed(t, params, -1.0));
  CHECK_THROWS(rhs_transformed(t, params, std::nan("")));
  CHECK_THROWS(rhs_transformed(t, params, INFINITY));

  NpnsState still = t;
  still.velocity = VectorField(g);
  const StateDerivative a = rhs_transformed(still, params, 0.3);
  const StateDerivative b = rhs_transformed(still, params, 4.0);
  CHECK(a.sigma == b.sigma);
  CHECK(a.rho == b.rho);

  const RhsTerms one = rhs_terms(t, params, 1.0);
  const RhsTerms two = rhs_terms(t, params, 2.0);
  CHECK(two.viscous == one.viscous);
  CHECK(max_abs_diff(two.inertia.x, 0.5 * one.inertia.x) == 0.0);
  CHECK(max_abs_diff(two.inertia.y, 0.5 * one.inertia.y) == 0.0);
  CHECK(max_abs_diff(two.forcing.x, 2.0 * one.forcing.x) == 0.0);
  CHECK(max_abs_diff(two.coupling.x, 2.0 * one.coupling.x) == 0.0);
  CHECK(max_abs_diff(two.coupling.y, 2.0 * one.coupling.y) == 0.0);
  CHECK(max_abs_diff(two.sigma_advection, 0.5 * one.sigma_advection) == 0.0);
  CHECK(two.sigma_migration == one.sigma_migration);
  CHECK(two.rho_diffusion == one.rho_diffusion);
}

TEST_CASE("structural properties of the right-hand side") {
  Grid g(16);
  std::mt19937_64 rng(127);
  PhysicalParams params(1.0, 1.0, 0.7, sin_y_force(g));
  for (int trial = 0; trial < 5; ++trial) {
    NpnsState s(random_solenoidal(g, 5, rng), random_field(g, 5, rng, false), random_field(g, 5, rng));
    const StateDerivative d = rhs_deterministic(s, params);
    CHECK(std::abs(d.sigma.coeff(0, 0)) <= 1e-14);
    CHECK(std::abs(d.rho.coeff(0, 0)) <= 1e-14);
    CHECK(d.velocity.x.coeff(0, 0) == Complex{});
    CHECK(max_divergence_coeff(d.velocity) <= 1e-12 * (1.0 + max_abs(d.velocity.x)));

    const SpectralField adv = advection_term(s.velocity, s.sigma);
    CHECK(std::abs(inner(adv, s.sigma)) <=
          1e-10 * norm_l2(s.velocity) * norm_l2(s.sigma) * seminorm_h1(s.sigma));

    const SpectralField phi = solve_poisson(s.rho, params.eps0);
    const PhysicalField rho = to_physical(s.rho);
    const double lhs = inner(product(rho, to_physical(laplacian(phi))), s.sigma);
    const double rhs = -inner(product(rho, rho), s.sigma) / params.eps0;
    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::abs(rhs));
  }
}

TEST_CASE("parameter validation") {
  Grid g(16);
  PhysicalParams ok(1.0, 1.0, 1.0, sin_y_force(g));
  CHECK_NOTHROW(ok.validate());
  PhysicalParams bad = ok;
  bad.nu = 0.0;
  CHECK_THROWS(bad.validate());
  bad = ok;
  bad.eps0 = -1.0;
  CHECK_THROWS(bad.validate());
  bad = ok;
  bad.force.x.set_mode(0, 0, 1.0);
  CHECK_THROWS_WITH(bad.validate(), "force must be mean-free");
  bad = ok;
  bad.force = gradient(SpectralField::from_function(g, [](double x, double y) { return std::cos(x + y); }));
  CHECK_THROWS_WITH(bad.validate(), "force must be divergence-free");
}
