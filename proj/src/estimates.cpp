#include "npns/estimates.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <json.hpp>
#include <ostream>
#include <stdexcept>

#include "npns/parallel.hpp"

namespace npns {

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::hypothesis_void: return "hypothesis-void";
    case CheckStatus::inconclusive: return "inconclusive";
    case CheckStatus::report_only: return "report-only";
  }
  return "unknown";
}

void write_check_csv(std::ostream& os, const CheckReport& report) {
  os << "time,lhs,rhs,residual,pass\n";
  for (const auto& r : report.rows)
    os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{}\n", r.time, r.lhs, r.rhs, r.residual, r.pass ? 1 : 0);
}

double inequality_tolerance(double c_check, double dt) { return std::max(1e-8, c_check * dt); }

namespace {

void require_diagnostics(const std::vector<DiagnosticsRecord>& diag, std::size_t min_size, const char* check) {
  if (diag.size() < min_size)
    throw std::invalid_argument(fmt::format("{}: trajectory has {} diagnostics records, need at least {}", check,
                                            diag.size(), min_size));
}

double square(double x) { return x * x; }

// Collects residual rows into a report with a fixed tolerance.
void finish(CheckReport& report) {
  report.worst_residual = -std::numeric_limits<double>::infinity();
  bool ok = true;
  for (const auto& r : report.rows) {
    report.worst_residual = std::max(report.worst_residual, r.residual);
    ok = ok && r.pass;
  }
  if (report.rows.empty()) report.worst_residual = 0.0;
  if (report.status == CheckStatus::pass && !ok) report.status = CheckStatus::fail;
}

struct LineFit {
  double slope = 0.0, intercept = 0.0, slope_se = 0.0;
  std::size_t n = 0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  f.n = x.size();
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += square(x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ss += square(y[i] - f.intercept - f.slope * x[i]);
    f.slope_se = std::sqrt(ss / (n - 2.0) / sxx);
  }
  return f;
}

}  // namespace

CheckReport check_mass_dissipation(const std::vector<DiagnosticsRecord>& diag, double dcoef, double tol) {
  require_diagnostics(diag, 2, "check_mass_dissipation");
  CheckReport report;
  report.name = "mass_dissipation";
  report.tolerance = tol;
  for (std::size_t i = 1; i < diag.size(); ++i) {
    const auto& a = diag[i - 1];
    const auto& b = diag[i];
    const double dt = b.time - a.time;
    const double mass = (square(b.l2_sigma) + square(b.l2_rho) - square(a.l2_sigma) - square(a.l2_rho)) / dt;
    const double diss = dcoef * (square(a.h1_sigma) + square(a.h1_rho) + square(b.h1_sigma) + square(b.h1_rho));
    CheckRow row;
    row.time = 0.5 * (a.time + b.time);
    row.lhs = mass + diss;
    row.rhs = 0.0;
    row.residual = row.lhs;
    row.pass = row.residual <= tol;
    report.rows.push_back(row);
  }
  finish(report);
  return report;
}

CheckReport check_decay_H(const std::vector<DiagnosticsRecord>& diag, double dcoef, double delta) {
  require_diagnostics(diag, 1, "check_decay_H");
  CheckReport report;
  report.name = "decay_H";
  report.tolerance = delta;
  double max_sigma = 0.0;
  for (const auto& d : diag) max_sigma = std::max(max_sigma, d.max_sigma);
  const double tol_pos = 1e-6 * max_sigma;
  bool void_hypothesis = false;
  for (const auto& d : diag)
    if (d.min_sigma < -tol_pos && d.l2_rho > 0.0) void_hypothesis = true;

  const double t0 = diag.front().time;
  const double y0 = square(diag.front().l2_sigma_fluct) + square(diag.front().l2_rho);
  double worst_ratio = 0.0;
  for (const auto& d : diag) {
    CheckRow row;
    row.time = d.time;
    row.lhs = square(d.l2_sigma_fluct) + square(d.l2_rho);
    row.rhs = y0 * std::exp(-2.0 * dcoef * (d.time - t0));
    row.residual = row.lhs - row.rhs;
    // Roundoff floor relative to the initial size.
    row.pass = row.lhs <= (1.0 + delta) * row.rhs + 1e-14 * y0;
    if (row.rhs > 0.0) worst_ratio = std::max(worst_ratio, row.lhs / row.rhs);
    report.rows.push_back(row);
  }
  finish(report);
  report.fitted["max_ratio"] = worst_ratio;
  report.fitted["min_sigma"] = std::min_element(diag.begin(), diag.end(), [](const auto& a, const auto& b) {
                                 return a.min_sigma < b.min_sigma;
                               })->min_sigma;
  report.note = "bound applied to the fluctuation sigma - mean(sigma); the mean is conserved";
  if (void_hypothesis) {
    report.status = CheckStatus::hypothesis_void;
    report.note += fmt::format("; sigma fell below -{:.3g} with rho nonzero", tol_pos);
  }
  return report;
}

namespace {

double velocity_source(const DiagnosticsRecord& d, const VelocityEnergyOptions& o) {
  return 2.0 / o.nu * square(d.z) *
         (o.coupling_constant * std::pow(d.l2_rho, 3) * d.h1_rho + square(o.force_l2));
}

}  // namespace

std::vector<double> velocity_energy_residuals(const std::vector<DiagnosticsRecord>& diag,
                                              const VelocityEnergyOptions& o) {
  std::vector<double> out;
  for (std::size_t i = 1; i < diag.size(); ++i) {
    const auto& p = diag[i - 1];
    const auto& d = diag[i];
    const double dt = d.time - p.time;
    const double lhs = (square(d.l2_v) - square(p.l2_v)) / dt + 0.5 * o.nu * (square(p.h1_v) + square(d.h1_v));
    out.push_back(lhs - 0.5 * (velocity_source(p, o) + velocity_source(d, o)));
  }
  return out;
}

CheckReport check_velocity_energy(const std::vector<DiagnosticsRecord>& diag, const VelocityEnergyOptions& o) {
  require_diagnostics(diag, 1, "check_velocity_energy");
  CheckReport report;
  report.name = "velocity_energy";
  report.tolerance = o.quadrature_rtol;
  const double v0 = square(diag.front().l2_v);
  double integral = 0.0;  // (2/nu) int e^{-nu (t - s)} z^2 (...) ds
  double decay = 1.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const auto& d = diag[i];
    if (i > 0) {
      const auto& p = diag[i - 1];
      const double dt = d.time - p.time;
      const double e = std::exp(-o.nu * dt);
      integral = e * integral + 0.5 * dt * (e * velocity_source(p, o) + velocity_source(d, o));
      decay *= e;
    }
    CheckRow row;
    row.time = d.time;
    row.lhs = square(d.l2_v);
    row.rhs = decay * v0 + integral;
    row.residual = row.lhs - row.rhs;
    row.pass = row.lhs <= (1.0 + o.quadrature_rtol) * row.rhs + 1e-14 * v0;
    report.rows.push_back(row);
  }
  finish(report);
  const std::vector<double> diff = velocity_energy_residuals(diag, o);
  double worst_diff = diff.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  std::size_t diff_violations = 0;
  for (double r : diff) {
    worst_diff = std::max(worst_diff, r);
    if (r > o.tol) ++diff_violations;
  }
  report.fitted["differential_worst_residual"] = worst_diff;
  report.fitted["differential_violations"] = static_cast<double>(diff_violations);
  report.fitted["differential_tolerance"] = o.tol;
  report.fitted["coupling_constant"] = o.coupling_constant;
  if (diff_violations > 0 && report.status == CheckStatus::pass) {
    report.status = CheckStatus::fail;
    report.note = fmt::format("{} intervals exceed the differential tolerance {:.3g}", diff_violations, o.tol);
  }
  return report;
}

CheckReport check_gradient_decay_V(const std::vector<DiagnosticsRecord>& diag) {
  require_diagnostics(diag, 1, "check_gradient_decay_V");
  CheckReport report;
  report.name = "gradient_decay_V";
  const double t0 = diag.front().time;
  std::vector<double> g(diag.size());
  double gmax = 0.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    g[i] = square(diag[i].h1_rho) + square(diag[i].h1_sigma);
    gmax = std::max(gmax, g[i]);
  }
  for (std::size_t i = 0; i < diag.size(); ++i) report.rows.push_back({diag[i].time, g[i], 0.0, 0.0, true});
  if (gmax == 0.0) {
    report.note = "zero gradients; fit skipped";
    return report;
  }
  // Tail half, without samples already at roundoff.
  const double t_mid = 0.5 * (t0 + diag.back().time);
  std::vector<double> x, y;
  for (std::size_t i = 0; i < diag.size(); ++i)
    if (diag[i].time >= t_mid && g[i] > 1e-24 * gmax) {
      x.push_back(diag[i].time - t0);
      y.push_back(std::log(g[i]));
    }
  if (x.size() < 10) {
    report.status = CheckStatus::inconclusive;
    report.note = fmt::format("only {} usable samples in the tail half", x.size());
    return report;
  }
  const LineFit fit = fit_line(x, y);
  const double a = -fit.slope;
  const boost::math::students_t dist(static_cast<double>(fit.n - 2));
  const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
  const double upper = fit.slope + tq * fit.slope_se;
  double envelope = 0.0;
  for (std::size_t i = 0; i < diag.size(); ++i)
    envelope = std::max(envelope, g[i] * std::exp(a * (diag[i].time - t0)));
  for (std::size_t i = 0; i < diag.size(); ++i) {
    auto& r = report.rows[i];
    r.rhs = envelope * std::exp(-a * (diag[i].time - t0));
    r.residual = r.lhs - r.rhs;
  }
  report.fitted["rate_a"] = a;
  report.fitted["prefactor_fit"] = std::exp(fit.intercept);
  report.fitted["envelope_A"] = envelope;
  report.fitted["slope_upper_95"] = upper;
  report.fitted["tail_samples"] = static_cast<double>(fit.n);
  report.worst_residual = upper;
  report.status = upper < 0.0 ? CheckStatus::pass : CheckStatus::fail;
  return report;
}

CheckReport check_time_averaged_bound(const std::vector<DiagnosticsRecord>& diag, double window, double eps0) {
  require_diagnostics(diag, 2, "check_time_averaged_bound");
  if (!(window > 0.0)) throw std::invalid_argument("check_time_averaged_bound: window must be positive");
  CheckReport report;
  report.name = "time_averaged_bound";
  report.status = CheckStatus::report_only;
  report.note = "cubic term weighted by 1/eps0 (Debye parameter), not by the noise intensity";
  auto integrand = [&](const DiagnosticsRecord& d) {
    return square(d.h1_rho) + square(d.h1_sigma) + std::pow(d.l3_grad_rho, 3) / eps0;
  };
  std::vector<double> t(diag.size()), cum(diag.size(), 0.0);
  for (std::size_t i = 0; i < diag.size(); ++i) {
    t[i] = diag[i].time;
    if (i > 0) cum[i] = cum[i - 1] + 0.5 * (t[i] - t[i - 1]) * (integrand(diag[i - 1]) + integrand(diag[i]));
  }
  auto cum_at = [&](double s) {
    const auto it = std::lower_bound(t.begin(), t.end(), s);
    if (it == t.end()) return cum.back();
    const std::size_t j = static_cast<std::size_t>(it - t.begin());
    if (j == 0 || *it == s) return cum[j];
    const double w = (s - t[j - 1]) / (t[j] - t[j - 1]);
    return cum[j - 1] + w * (cum[j] - cum[j - 1]);
  };
  std::vector<double> starts, values;
  const double slack = 1e-9 * window;
  for (int k = 0;; ++k) {
    const double a = t.front() + k * window;
    if (a + window > t.back() + slack) break;
    starts.push_back(a);
    values.push_back(cum_at(std::min(a + window, t.back())) - cum_at(a));
  }
  std::vector<double> fx, fy;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (values[k] > 0.0) fx.push_back(starts[k]), fy.push_back(std::log(values[k]));
  double rate = 0.0, constant = 0.0;
  if (fx.size() >= 2) {
    rate = -fit_line(fx, fy).slope;
    for (std::size_t k = 0; k < values.size(); ++k)
      constant = std::max(constant, values[k] * std::exp(rate * starts[k]) / window);
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    CheckRow row;
    row.time = starts[k];
    row.lhs = values[k];
    row.rhs = constant * window * std::exp(-rate * starts[k]);
    row.residual = row.lhs - row.rhs;
    report.rows.push_back(row);
  }
  bool monotone = true;
  for (std::size_t k = values.size() / 2 + 1; k < values.size(); ++k) monotone = monotone && values[k] <= values[k - 1];
  report.fitted["rate"] = rate;
  report.fitted["constant"] = constant;
  report.fitted["windows"] = static_cast<double>(values.size());
  report.fitted["monotone_tail"] = monotone ? 1.0 : 0.0;
  report.worst_residual = 0.0;
  for (const auto& r : report.rows) report.worst_residual = std::max(report.worst_residual, r.residual);
  return report;
}

double calibrate_check_constant(const std::vector<double>& coarse, const std::vector<double>& fine, double dt) {
  if (coarse.size() != fine.size()) throw std::invalid_argument("calibration series differ in length");
  double gap = 0.0;
  for (std::size_t i = 0; i < coarse.size(); ++i) gap = std::max(gap, std::abs(coarse[i] - fine[i]));
  return 2.0 * gap / dt;
}

std::vector<DiagnosticsRecord> subsample(const std::vector<DiagnosticsRecord>& diag, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  std::vector<DiagnosticsRecord> out;
  for (std::size_t i = 0; i < diag.size(); i += static_cast<std::size_t>(stride)) out.push_back(diag[i]);
  return out;
}

AbsorbingRadii compute_absorbing_radii(const WienerPath& path, double epsilon, double t_truncate,
                                       const RadiiInputs& in) {
  if (!(in.nu > 0.0) || !(in.dcoef > 0.0)) throw std::invalid_argument("nu and D must be positive");
  if (!(in.r0 >= 0.0) || !(in.gradient_bound_a >= 0.0)) throw std::invalid_argument("R0 and A must be nonnegative");
  if (in.quadrature_substeps < 1) throw std::invalid_argument("quadrature_substeps must be >= 1");
  const double limit = -std::log(1e12) / in.nu;
  if (t_truncate > limit)
    throw std::invalid_argument(
        fmt::format("insufficient window: t_truncate = {} must be <= -ln(1e12)/nu = {:.6g}", t_truncate, limit));
  const double t_lo = std::min(t_truncate, -1.0);
  if (!path.seeded() && path.t_min() > t_lo + 1e-12)
    throw std::invalid_argument(fmt::format("insufficient window: path starts at {} but needs {}", path.t_min(), t_lo));
  const WienerPath w = path.seeded() ? path.covering(t_lo, 0.0) : path;

  // Quadrature nodes: t_lo, the path grid inside, 0; each interval split
  // into `quadrature_substeps` pieces.
  std::vector<double> grid{t_lo};
  for (double t : w.grid_times())
    if (t > t_lo + 1e-12 && t < -1e-12) grid.push_back(t);
  grid.push_back(0.0);
  std::vector<double> nodes;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    for (int s = 0; s < in.quadrature_substeps; ++s)
      nodes.push_back(grid[i] + (grid[i + 1] - grid[i]) * s / in.quadrature_substeps);
  nodes.push_back(0.0);

  AbsorbingRadii r;
  r.t_truncate = t_truncate;
  r.r0 = in.r0;
  double int_z4 = 0.0, sup_zm2 = 0.0, sup_z4 = 0.0;
  double prev_t = 0.0, prev_nu = 0.0, prev_half = 0.0, prev_z4 = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double t = nodes[i];
    const double z = z_of(w, t, epsilon);
    const double z2 = z * z;
    const double f_nu = z2 * std::exp(in.nu * t), f_half = z2 * std::exp(0.5 * in.nu * t), f_z4 = z2 * z2;
    if (i > 0) {
      const double h = t - prev_t;
      if (prev_t >= t_truncate - 1e-12) {
        r.integral_nu += 0.5 * h * (prev_nu + f_nu);
        r.integral_half_nu += 0.5 * h * (prev_half + f_half);
      }
      if (prev_t >= -1.0 - 1e-12) int_z4 += 0.5 * h * (prev_z4 + f_z4);
    }
    if (t >= -1.0 - 1e-12) {
      sup_zm2 = std::max(sup_zm2, 1.0 / z2);
      sup_z4 = std::max(sup_z4, f_z4);
    }
    prev_t = t, prev_nu = f_nu, prev_half = f_half, prev_z4 = f_z4;
  }

  const double C = in.coupling_constant;
  const double A = in.gradient_bound_a;
  const double R0 = in.r0;
  const double nu = in.nu;
  const double f2 = square(in.force_l2);
  const double c_f = in.c_f.value_or(f2);
  r.r1 = C * std::sqrt(A) * std::pow(R0, 3) * r.integral_nu;
  r.r2 = r.integral_half_nu;
  r.r_f = f2 * r.integral_nu;
  r.R1 = std::exp(nu) * (1.0 + 2.0 / nu * (r.r1 + r.r2 + r.r_f));
  r.R2 = R0 * R0 / (2.0 * in.dcoef);
  r.R3 = r.R1 * r.R1 / nu + std::pow(R0, 3) / (nu * nu) * (int_z4 + r.R2 + c_f);
  r.r3 = C * r.R3 * sup_zm2;
  r.r4 = std::pow(R0, 6) * sup_z4;
  r.r5 = c_f + C * int_z4;
  r.R4 = std::exp(r.r3) * (r.R3 * r.R3 + 0.5 * in.dcoef * r.R2 + r.r4 + r.r5);
  r.r6 = C * A * r.R3 * sup_zm2;
  r.R5 = std::exp(r.r6) * r.R2;

  // |omega(s)| <= kappa |s| beyond the window, with kappa read off the
  // outer half of the window.
  if (epsilon != 0.0)
    for (double t : nodes)
      if (t <= 0.5 * t_truncate && t >= t_truncate - 1e-12) r.kappa = std::max(r.kappa, std::abs(w(t) / t));
  auto tail = [&](double rate) {
    const double q = rate - 2.0 * std::abs(epsilon) * r.kappa;
    return q > 0.0 ? std::exp(q * t_truncate) / q : std::numeric_limits<double>::infinity();
  };
  const double tail_nu = tail(nu), tail_half = tail(0.5 * nu);
  r.truncation_tail_bound =
      std::exp(nu) * 2.0 / nu * (C * std::sqrt(A) * std::pow(R0, 3) * tail_nu + tail_half + f2 * tail_nu);
  return r;
}

NpnsState absorption_pullback(double t0, const WienerPath& path, double epsilon, const NpnsState& x0,
                              const PhysicalParams& params, const IntegratorConfig& config) {
  if (!(t0 < 0.0)) throw std::invalid_argument("pullback start t0 must be negative");
  const WienerPath window = path.seeded() ? path.covering(t0, 0.0) : path;
  const Noise noise{&window, epsilon};
  NpnsState x = x0;
  x.time = t0;
  x = to_transformed(x, z_of(window, t0, epsilon));
  IntegratorConfig cfg = config;
  cfg.record_diagnostics = false;
  cfg.snapshot_stride = 0;
  const double h = x0.grid().spacing();
  constexpr double kSegment = 0.25;
  while (x.time < -1e-12) {
    const double end = std::min(0.0, x.time + kSegment);
    const double speed = diagnose(x, z_of(window, x.time, epsilon)).max_speed;
    cfg.dt = speed > 0.0 ? std::min(config.dt, 0.8 * config.cfl_limit * h / speed) : config.dt;
    for (int attempt = 0;; ++attempt) {
      try {
        x = integrate(x, params, noise, end, cfg).final_state();
        break;
      } catch (const CflViolation& e) {
        if (attempt == 8) throw;
        cfg.dt = std::min(0.5 * cfg.dt, e.advisory_dt);
      }
    }
    x.time = end;
  }
  return to_physical_gauge(x, z_of(window, 0.0, epsilon));
}

AbsorptionReport verify_absorption(const WienerPath& path, double epsilon, const PhysicalParams& params,
                                   const std::vector<NpnsState>& initial_data, const std::vector<double>& t0_levels,
                                   double radius, const IntegratorConfig& config, int workers) {
  if (initial_data.empty()) throw std::invalid_argument("verify_absorption: no initial data");
  if (t0_levels.empty()) throw std::invalid_argument("verify_absorption: no t0 levels");
  for (std::size_t j = 0; j < t0_levels.size(); ++j)
    if (!(t0_levels[j] < 0.0) || (j > 0 && !(t0_levels[j] < t0_levels[j - 1])))
      throw std::invalid_argument("verify_absorption: t0 levels must be negative and decreasing");
  const WienerPath window = path.seeded() ? path.covering(t0_levels.back(), 0.0) : path;
  const std::size_t levels = t0_levels.size();
  const auto norms = parallel_map<double>(initial_data.size() * levels, workers, [&](std::size_t job) {
    return norm_h(absorption_pullback(t0_levels[job % levels], window, epsilon, initial_data[job / levels], params,
                                      config));
  });

  AbsorptionReport report;
  report.radius = radius;
  report.passed = true;
  for (std::size_t s = 0; s < initial_data.size(); ++s) {
    AbsorptionSample sample;
    sample.initial_norm = norm_h(initial_data[s]);
    sample.t0 = t0_levels;
    sample.norm_h.assign(norms.begin() + static_cast<long>(s * levels), norms.begin() + static_cast<long>((s + 1) * levels));
    // Entry: the shallowest level from which every deeper level is inside.
    std::size_t entry = levels;
    for (std::size_t j = levels; j-- > 0;) {
      if (sample.norm_h[j] <= radius) entry = j;
      else break;
    }
    sample.entered = entry < levels;
    if (sample.entered) {
      sample.entry_time = -t0_levels[entry];
      report.entry_time = std::max(report.entry_time, sample.entry_time);
    } else {
      report.passed = false;
      report.entry_time = std::numeric_limits<double>::infinity();
    }
    report.samples.push_back(std::move(sample));
  }
  return report;
}

std::string reports_summary_json(const std::vector<CheckReport>& reports, const std::string& header_note) {
  nlohmann::ordered_json j;
  j["note"] = header_note;
  auto& list = j["checks"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json e;
    e["name"] = r.name;
    e["status"] = to_string(r.status);
    e["tolerance"] = r.tolerance;
    e["worst_residual"] = r.worst_residual;
    e["rows"] = r.rows.size();
    std::size_t violations = 0;
    for (const auto& row : r.rows) violations += row.pass ? 0 : 1;
    e["violations"] = violations;
    e["fitted"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.fitted) e["fitted"][k] = v;
    if (!r.note.empty()) e["note"] = r.note;
    list.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

}  // namespace npns
