#pragma once

// Right-hand sides of the Nernst-Planck-Navier-Stokes system in
// (velocity, sigma = c1 + c2, rho = c1 - c2) variables.
//
// Physical gauge (u):      du/dt = -nu A u - B(u) - P[rho grad Phi] + f
// Transformed gauge (v=zu): dv/dt = -nu A v - B(v)/z - z P[rho grad Phi] + z f
// and in both gauges, with a = u = v/z the advecting velocity,
//   d sigma/dt = D Lap sigma - div(a sigma) + D div(rho grad Phi)
//   d rho/dt   = D Lap rho   - div(a rho)   + D div(sigma grad Phi)
// where -eps0 Lap Phi = rho.

#include "npns/spectral.hpp"

namespace npns {

enum class Gauge { physical, transformed };

const char* to_string(Gauge gauge);

struct NpnsState {
  VectorField velocity;
  SpectralField sigma;
  SpectralField rho;
  double time = 0.0;
  Gauge gauge = Gauge::physical;

  explicit NpnsState(const Grid& grid)
      : velocity(grid), sigma(grid), rho(grid) {}
  NpnsState(VectorField v, SpectralField s, SpectralField r, double t = 0.0,
            Gauge g = Gauge::physical);

  const Grid& grid() const noexcept { return sigma.grid(); }

  SpectralField c1() const;
  SpectralField c2() const;

  bool operator==(const NpnsState& o) const {
    return velocity == o.velocity && sigma == o.sigma && rho == o.rho && time == o.time &&
           gauge == o.gauge;
  }
};

/// Time derivative of a state (or any state-shaped increment).
struct StateDerivative {
  VectorField velocity;
  SpectralField sigma;
  SpectralField rho;

  explicit StateDerivative(const Grid& grid) : velocity(grid), sigma(grid), rho(grid) {}
  StateDerivative& operator+=(const StateDerivative& o);
  StateDerivative& operator*=(double s);
};

struct PhysicalParams {
  double nu = 1.0;
  double dcoef = 1.0;
  double eps0 = 1.0;
  VectorField force;

  explicit PhysicalParams(const Grid& grid) : force(grid) {}
  PhysicalParams(double nu_, double d_, double eps0_, VectorField f);

  /// Throws std::invalid_argument listing the first violated invariant.
  void validate() const;
};

/// b(u, v, w) = ((u . grad) v, w), dealiased pseudo-spectral products.
double trilinear_b(const VectorField& u, const VectorField& v, const VectorField& w);

/// B(u) = P[(u . grad) u], evaluated in the divergence form div(u (x) u).
VectorField nonlinear_term(const VectorField& u);

/// sign * div(c grad Phi), dealiased.
SpectralField migration_term(const SpectralField& c, const SpectralField& phi, int sign);

/// div(a c) for a divergence-free advecting velocity a, dealiased.
SpectralField advection_term(const VectorField& a, const SpectralField& c);

/// Every term of the right-hand side, kept separate so that callers can
/// split linear (viscous, diffusion) from explicit parts or inspect terms.
struct RhsTerms {
  VectorField viscous;    // -nu A v
  VectorField inertia;    // -B(v)/z
  VectorField coupling;   // -z P[rho grad Phi]
  VectorField forcing;    // z f
  SpectralField sigma_diffusion;   // D Lap sigma
  SpectralField sigma_advection;   // -div(v sigma)/z
  SpectralField sigma_migration;   // D div(rho grad Phi)
  SpectralField rho_diffusion;
  SpectralField rho_advection;
  SpectralField rho_migration;     // D div(sigma grad Phi)

  explicit RhsTerms(const Grid& g);

  StateDerivative total() const;
  /// All terms except viscous and diffusion.
  StateDerivative explicit_part() const;
};

/// Assembles all terms; z = 1 is the physical gauge.
RhsTerms rhs_terms(const NpnsState& state, const PhysicalParams& params, double z);

StateDerivative rhs_deterministic(const NpnsState& state, const PhysicalParams& params);
/// Throws std::invalid_argument if z is not positive and finite.
StateDerivative rhs_transformed(const NpnsState& state, const PhysicalParams& params, double z);

/// H-norm of the state, (||u||^2 + ||sigma||^2 + ||rho||^2)^(1/2).
double norm_h(const NpnsState& state);
/// V-norm, the same with H^1 seminorms.
double norm_v(const NpnsState& state);
/// H-norm of a - b (fields only; time and gauge ignored).
double distance_h(const NpnsState& a, const NpnsState& b);
double distance_v(const NpnsState& a, const NpnsState& b);

/// The state with velocity multiplied by s (gauge change v = s u).
NpnsState scale_velocity(NpnsState state, double s);

}  // namespace npns
