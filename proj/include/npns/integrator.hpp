#pragma once

// Integrating-factor time stepping for both gauges, and the cocycle built
// from it.
//
// Diffusion (nu |k|^2 for velocity, D |k|^2 for sigma and rho) is
// integrated exactly by the factor E(tau) = exp(-c |k|^2 tau); everything
// else is explicit:
//   if_euler: y+ = E(dt) (y + dt N(y, z(t)))
//   if_rk2:   y* = E(dt/2) (y + dt/2 N(y, z(t)))
//             y+ = E(dt) y + dt E(dt/2) N(y*, z(t + dt/2))
// z is evaluated at each stage time from the path and held fixed during
// the stage.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "npns/diagnostics.hpp"
#include "npns/dynamics.hpp"
#include "npns/wiener.hpp"

namespace npns {

enum class Scheme { if_euler, if_rk2 };

const char* to_string(Scheme scheme);
/// Throws std::invalid_argument on an unknown name.
Scheme parse_scheme(const std::string& name);

struct IntegratorConfig {
  double dt = 1e-3;
  Scheme scheme = Scheme::if_rk2;
  double cfl_limit = 0.5;
  /// Abort once max(z, 1/z) exceeds this.
  double max_z_ratio = 1e6;
  /// Keep every stride-th state; 0 keeps only the first and last.
  int snapshot_stride = 0;
  bool record_diagnostics = true;

  void validate() const;
};

/// Raised before a step whose advective Courant number dt max|u| / h
/// exceeds the configured limit.
class CflViolation : public std::runtime_error {
 public:
  CflViolation(const std::string& what, double advisory, double t)
      : std::runtime_error(what), advisory_dt(advisory), time(t) {}
  double advisory_dt;
  double time;
};

/// Source of z(t). With no path, or epsilon = 0, z is identically 1.
struct Noise {
  const WienerPath* path = nullptr;
  double epsilon = 0.0;

  double z(double t) const;
};

struct Trajectory {
  std::vector<NpnsState> snapshots;
  std::vector<DiagnosticsRecord> diagnostics;

  const NpnsState& final_state() const { return snapshots.back(); }
};

/// One step of size dt from state.time. Physical-gauge states ignore the
/// noise (z = 1). Throws CflViolation or PathExcursion.
NpnsState step(const NpnsState& state, const PhysicalParams& params, const Noise& noise, double dt,
               const IntegratorConfig& config);

/// Advances to t_end in ceil((t_end - t0) / dt) equal steps, so the run
/// ends exactly at t_end with a step no larger than config.dt.
Trajectory integrate(const NpnsState& state, const PhysicalParams& params, const Noise& noise,
                     double t_end, const IntegratorConfig& config);

/// v = z u and back; the state's gauge tag changes accordingly.
NpnsState to_transformed(NpnsState physical, double z);
NpnsState to_physical_gauge(NpnsState transformed, double z);

/// S(t, omega) x0: x0 physical at time 0, returns the physical state at t.
NpnsState cocycle_S(double t, const WienerPath& path, double epsilon, const NpnsState& x0,
                    const PhysicalParams& params, const IntegratorConfig& config);

/// x(0; t0, x0): integrates the transformed system on [t0, 0] along the
/// original path, starting from v(t0) = z(t0) u0. Returns the physical
/// state at time 0.
NpnsState pullback_evaluate(double t0, const WienerPath& path, double epsilon, const NpnsState& x0,
                            const PhysicalParams& params, const IntegratorConfig& config);

/// The same quantity as S(-t0, theta_{t0} omega) x0.
NpnsState pullback_shifted(double t0, const WienerPath& path, double epsilon, const NpnsState& x0,
                           const PhysicalParams& params, const IntegratorConfig& config);

/// Independent reference: stochastic Heun (Stratonovich) scheme for the
/// original equation du = F(u) dt + eps u o dW, fully explicit. x0 is
/// physical at x0.time; returns the physical state at t_end.
NpnsState integrate_stratonovich_reference(const NpnsState& x0, const PhysicalParams& params,
                                           const WienerPath& path, double epsilon, double t_end,
                                           double dt);

}  // namespace npns
