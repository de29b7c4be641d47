#pragma once

// A priori inequalities checked along recorded trajectories, and the
// random absorbing radii built from path integrals of z.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "npns/diagnostics.hpp"
#include "npns/integrator.hpp"
#include "npns/wiener.hpp"

namespace npns {

enum class CheckStatus { pass, fail, hypothesis_void, inconclusive, report_only };

const char* to_string(CheckStatus status);

struct CheckRow {
  double time = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;  // lhs - rhs; the inequality asks residual <= tolerance
  bool pass = true;
};

struct CheckReport {
  std::string name;
  CheckStatus status = CheckStatus::pass;
  std::vector<CheckRow> rows;
  double tolerance = 0.0;
  double worst_residual = 0.0;  // max residual over rows (or max ratio, per check)
  std::map<std::string, double> fitted;
  std::string note;

  bool failed() const { return status == CheckStatus::fail; }
};

/// CSV with columns time,lhs,rhs,residual,pass.
void write_check_csv(std::ostream& os, const CheckReport& report);

/// tol_ineq = max(1e-8, C_check dt).
double inequality_tolerance(double c_check, double dt);

/// Per interval: d/dt(|sigma|^2 + |rho|^2) by differences plus 2D times the
/// trapezoid mean of |grad sigma|^2 + |grad rho|^2; must be <= tol.
CheckReport check_mass_dissipation(const std::vector<DiagnosticsRecord>& diag, double dcoef, double tol);

/// |sigma - mean|^2 + |rho|^2 <= (1 + delta) (initial) exp(-2 D (t - t0)).
/// The bound needs sigma >= 0 wherever rho != 0; otherwise the report is
/// hypothesis_void. tol_pos = 1e-6 max(sigma).
CheckReport check_decay_H(const std::vector<DiagnosticsRecord>& diag, double dcoef, double delta);

struct VelocityEnergyOptions {
  double nu = 1.0;
  double force_l2 = 0.0;          // ||f||
  double coupling_constant = 1.0; // multiplies |rho|^3 |grad rho|
  double tol = 1e-8;              // residual tolerance of the differential form
  double quadrature_rtol = 1e-4;  // slack on the integrated (Gronwall) form
};

/// Differential form d/dt|v|^2 + nu |grad v|^2 <= (2/nu) z^2 (C |rho|^3 |grad rho| + |f|^2)
/// per interval, and the integrated form
///   |v(t)|^2 <= e^{-nu (t - t0)} |v(t0)|^2
///               + (2/nu) int_{t0}^t e^{-nu (t - s)} z^2 (C |rho|^3 |grad rho| + |f|^2) ds
/// at every sample. Rows hold the integrated form; the differential
/// residuals are summarized in `fitted`.
CheckReport check_velocity_energy(const std::vector<DiagnosticsRecord>& diag,
                                  const VelocityEnergyOptions& options);

/// Residuals of the differential form, one per interval (lhs - rhs).
std::vector<double> velocity_energy_residuals(const std::vector<DiagnosticsRecord>& diag,
                                              const VelocityEnergyOptions& options);

/// Fits log(|grad rho|^2 + |grad sigma|^2) over the tail half of the run;
/// passes on a negative slope at 95% confidence. Reports the rate a, the
/// fitted prefactor and the envelope constant A = max G(t) e^{a (t - t0)}.
CheckReport check_gradient_decay_V(const std::vector<DiagnosticsRecord>& diag);

/// Integrals over consecutive windows of length T of
/// |grad rho|^2 + |grad sigma|^2 + (1/eps0) |grad rho|_{L^3}^3 (trapezoid),
/// with a fitted exponential envelope. Report-only.
CheckReport check_time_averaged_bound(const std::vector<DiagnosticsRecord>& diag, double window,
                                      double eps0);

/// C_check from the same check run at dt and dt/2: twice the largest gap
/// between residuals on the coarse intervals, divided by dt. The fine
/// diagnostics are subsampled to the coarse times first.
double calibrate_check_constant(const std::vector<double>& coarse_residuals,
                                const std::vector<double>& fine_residuals_on_coarse_intervals, double dt);

/// Every other record, keeping the first; maps a dt/2 run onto the dt grid.
std::vector<DiagnosticsRecord> subsample(const std::vector<DiagnosticsRecord>& diag, int stride);

struct RadiiInputs {
  double nu = 1.0;
  double dcoef = 1.0;
  double force_l2 = 0.0;
  double r0 = 1.0;                 // deterministic radius for |sigma|, |rho|
  double gradient_bound_a = 1.0;   // A
  double coupling_constant = 1.0;  // C in front of |rho|^3 |grad rho| and in r3, r6
  std::optional<double> c_f;       // defaults to |f|^2
  int quadrature_substeps = 1;     // trapezoid points per path interval
};

struct AbsorbingRadii {
  double r0 = 0.0;
  double r1 = 0.0, r2 = 0.0, r_f = 0.0;  // lower-case path integrals
  double R1 = 0.0, R2 = 0.0, R3 = 0.0, R4 = 0.0, R5 = 0.0;
  double r3 = 0.0, r4 = 0.0, r5 = 0.0, r6 = 0.0;
  double integral_nu = 0.0;       // int z^2 e^{nu s} ds over the window
  double integral_half_nu = 0.0;  // int z^2 e^{nu s / 2} ds
  double kappa = 0.0;             // max |omega(s)/s| observed beyond the truncation point
  double truncation_tail_bound = 0.0;  // bound on the omitted part of R1
  double t_truncate = 0.0;

  double h_ball() const { return 2.0 * r0 + R1; }
  double v_ball() const { return R4 + 2.0 * R5; }
};

/// Throws std::invalid_argument when t_truncate > -ln(1e12)/nu or the path
/// window does not reach t_truncate.
AbsorbingRadii compute_absorbing_radii(const WienerPath& path, double epsilon, double t_truncate,
                                       const RadiiInputs& inputs);

struct AbsorptionSample {
  std::vector<double> t0;
  std::vector<double> norm_h;  // |S(-t0, theta_t0 omega) x0|_H
  double initial_norm = 0.0;
  double entry_time = 0.0;     // smallest |t0| from which every deeper level is inside
  bool entered = false;
};

struct AbsorptionReport {
  double radius = 0.0;  // 2 R0 + R1 (+ gauge)
  std::vector<AbsorptionSample> samples;
  double entry_time = 0.0;  // max over samples
  bool passed = false;
};

/// x(0; t0, x0) like pullback_evaluate, in segments of 0.25 time units.
/// Each segment takes dt = min(config.dt, 0.8 cfl_limit h / max|u|) from
/// the state at its start, and is halved on a CFL violation, so large data
/// do not force a tiny step over the whole run.
NpnsState absorption_pullback(double t0, const WienerPath& path, double epsilon, const NpnsState& x0,
                              const PhysicalParams& params, const IntegratorConfig& config);

/// Pullback runs from every initial datum at every t0 (negative,
/// decreasing); a sample is absorbed when every t0 at or beyond its entry
/// level lands inside the ball.
AbsorptionReport verify_absorption(const WienerPath& path, double epsilon, const PhysicalParams& params,
                                   const std::vector<NpnsState>& initial_data, const std::vector<double>& t0_levels,
                                   double radius, const IntegratorConfig& config, int workers = 1);

/// Summary JSON of several reports (worst residuals, statuses, fitted constants).
std::string reports_summary_json(const std::vector<CheckReport>& reports, const std::string& header_note);

}  // namespace npns
