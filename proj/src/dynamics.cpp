#include "npns/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace npns {

const char* to_string(Gauge gauge) {
  return gauge == Gauge::physical ? "physical" : "transformed";
}

NpnsState::NpnsState(VectorField v, SpectralField s, SpectralField r, double t, Gauge g)
    : velocity(std::move(v)), sigma(std::move(s)), rho(std::move(r)), time(t), gauge(g) {
  if (!(velocity.grid() == sigma.grid()) || !(sigma.grid() == rho.grid()))
    throw std::invalid_argument("grid mismatch");
}

SpectralField NpnsState::c1() const { return 0.5 * (sigma + rho); }
SpectralField NpnsState::c2() const { return 0.5 * (sigma - rho); }

StateDerivative& StateDerivative::operator+=(const StateDerivative& o) {
  velocity += o.velocity;
  sigma += o.sigma;
  rho += o.rho;
  return *this;
}

StateDerivative& StateDerivative::operator*=(double s) {
  velocity *= s;
  sigma *= s;
  rho *= s;
  return *this;
}

PhysicalParams::PhysicalParams(double nu_, double d_, double eps0_, VectorField f)
    : nu(nu_), dcoef(d_), eps0(eps0_), force(std::move(f)) {}

void PhysicalParams::validate() const {
  if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
  if (!(dcoef > 0.0)) throw std::invalid_argument("D must be positive");
  if (!(eps0 > 0.0)) throw std::invalid_argument("eps0 must be positive");
  if (std::abs(force.x.coeff(0, 0)) > 1e-14 || std::abs(force.y.coeff(0, 0)) > 1e-14)
    throw std::invalid_argument("force must be mean-free");
  const double scale = std::max(1.0, norm_l2(force));
  if (norm_l2(leray_project(force) - force) > 1e-10 * scale)
    throw std::invalid_argument("force must be divergence-free");
}

double trilinear_b(const VectorField& u, const VectorField& v, const VectorField& w) {
  if (!(u.grid() == v.grid()) || !(v.grid() == w.grid())) throw std::invalid_argument("grid mismatch");
  const PhysicalField u1 = to_physical(u.x), u2 = to_physical(u.y);
  VectorField conv(u.grid());
  const SpectralField* comps[2] = {&v.x, &v.y};
  SpectralField* out[2] = {&conv.x, &conv.y};
  for (int i = 0; i < 2; ++i) {
    *out[i] = product(u1, to_physical(partial(*comps[i], 0)));
    *out[i] += product(u2, to_physical(partial(*comps[i], 1)));
  }
  return inner(conv, w);
}

namespace {

VectorField nonlinear_from_physical(const Grid& g, const PhysicalField& u1,
                                    const PhysicalField& u2) {
  const SpectralField u11 = product(u1, u1);
  const SpectralField u12 = product(u1, u2);
  const SpectralField u22 = product(u2, u2);
  VectorField div_flux(partial(u11, 0) + partial(u12, 1), partial(u12, 0) + partial(u22, 1));
  (void)g;
  return leray_project(div_flux);
}

SpectralField flux_divergence(const PhysicalField& a1, const PhysicalField& a2,
                              const PhysicalField& c) {
  SpectralField out = partial(product(a1, c), 0);
  out += partial(product(a2, c), 1);
  return out;
}

}  // namespace

VectorField nonlinear_term(const VectorField& u) {
  return nonlinear_from_physical(u.grid(), to_physical(u.x), to_physical(u.y));
}

SpectralField migration_term(const SpectralField& c, const SpectralField& phi, int sign) {
  if (!(c.grid() == phi.grid())) throw std::invalid_argument("grid mismatch");
  SpectralField out = flux_divergence(to_physical(partial(phi, 0)), to_physical(partial(phi, 1)),
                                      to_physical(c));
  if (sign < 0) out *= -1.0;
  return out;
}

SpectralField advection_term(const VectorField& a, const SpectralField& c) {
  if (!(a.grid() == c.grid())) throw std::invalid_argument("grid mismatch");
  return flux_divergence(to_physical(a.x), to_physical(a.y), to_physical(c));
}

RhsTerms::RhsTerms(const Grid& g)
    : viscous(g), inertia(g), coupling(g), forcing(g), sigma_diffusion(g), sigma_advection(g),
      sigma_migration(g), rho_diffusion(g), rho_advection(g), rho_migration(g) {}

StateDerivative RhsTerms::explicit_part() const {
  StateDerivative d(viscous.grid());
  d.velocity = inertia;
  d.velocity += coupling;
  d.velocity += forcing;
  d.sigma = sigma_advection;
  d.sigma += sigma_migration;
  d.rho = rho_advection;
  d.rho += rho_migration;
  return d;
}

StateDerivative RhsTerms::total() const {
  StateDerivative d = explicit_part();
  d.velocity += viscous;
  d.sigma += sigma_diffusion;
  d.rho += rho_diffusion;
  return d;
}

RhsTerms rhs_terms(const NpnsState& state, const PhysicalParams& params, double z) {
  if (!(z > 0.0) || !std::isfinite(z)) throw std::invalid_argument("z must be positive and finite");
  const Grid& g = state.grid();
  const double inv_z = 1.0 / z;
  RhsTerms t(g);

  const SpectralField phi = solve_poisson(state.rho, params.eps0);
  const PhysicalField v1 = to_physical(state.velocity.x), v2 = to_physical(state.velocity.y);
  const PhysicalField sigma = to_physical(state.sigma), rho = to_physical(state.rho);
  const PhysicalField phi1 = to_physical(partial(phi, 0)), phi2 = to_physical(partial(phi, 1));

  // A = -P Lap coincides with -Lap on divergence-free fields.
  t.viscous = params.nu * laplacian(state.velocity);

  t.inertia = nonlinear_from_physical(g, v1, v2);
  t.inertia *= -inv_z;

  // rho grad Phi feeds both the momentum coupling and the sigma migration.
  const SpectralField rho_phi1 = product(rho, phi1), rho_phi2 = product(rho, phi2);
  t.coupling = leray_project(VectorField(rho_phi1, rho_phi2));
  t.coupling *= -z;

  t.forcing = params.force;
  t.forcing *= z;

  t.sigma_diffusion = params.dcoef * laplacian(state.sigma);
  t.rho_diffusion = params.dcoef * laplacian(state.rho);

  t.sigma_advection = flux_divergence(v1, v2, sigma);
  t.sigma_advection *= -inv_z;
  t.rho_advection = flux_divergence(v1, v2, rho);
  t.rho_advection *= -inv_z;

  t.sigma_migration = partial(rho_phi1, 0);
  t.sigma_migration += partial(rho_phi2, 1);
  t.sigma_migration *= params.dcoef;
  t.rho_migration = flux_divergence(phi1, phi2, sigma);
  t.rho_migration *= params.dcoef;

  // Velocity stays mean-free; every scalar term is a divergence, so its
  // zero mode is exactly zero already.
  for (VectorField* f : {&t.viscous, &t.inertia, &t.coupling, &t.forcing}) {
    f->x.set_mean_free(true);
    f->y.set_mean_free(true);
  }
  return t;
}

StateDerivative rhs_deterministic(const NpnsState& state, const PhysicalParams& params) {
  if (state.gauge != Gauge::physical) throw std::invalid_argument("rhs_deterministic needs the physical gauge");
  return rhs_terms(state, params, 1.0).total();
}

StateDerivative rhs_transformed(const NpnsState& state, const PhysicalParams& params, double z) {
  if (state.gauge != Gauge::transformed) throw std::invalid_argument("rhs_transformed needs the transformed gauge");
  return rhs_terms(state, params, z).total();
}

double norm_h(const NpnsState& s) {
  const double a = norm_l2(s.velocity), b = norm_l2(s.sigma), c = norm_l2(s.rho);
  return std::sqrt(a * a + b * b + c * c);
}

double norm_v(const NpnsState& s) {
  const double a = seminorm_h1(s.velocity), b = seminorm_h1(s.sigma), c = seminorm_h1(s.rho);
  return std::sqrt(a * a + b * b + c * c);
}

double distance_h(const NpnsState& a, const NpnsState& b) {
  return norm_h(NpnsState(a.velocity - b.velocity, a.sigma - b.sigma, a.rho - b.rho));
}

double distance_v(const NpnsState& a, const NpnsState& b) {
  return norm_v(NpnsState(a.velocity - b.velocity, a.sigma - b.sigma, a.rho - b.rho));
}

NpnsState scale_velocity(NpnsState state, double s) {
  state.velocity *= s;
  return state;
}

}  // namespace npns
