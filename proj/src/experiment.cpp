#include "npns/experiment.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "npns/attractor.hpp"
#include "npns/estimates.hpp"
#include "npns/field_io.hpp"
#include "npns/manifest.hpp"
#include "npns/parallel.hpp"

namespace npns {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

template <typename Writer>
std::string to_text(Writer&& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

void write_state(const fs::path& path, const NpnsState& s, Precision precision) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_fields(path, {s.velocity.x, s.velocity.y, s.sigma, s.rho}, precision);
}

// A fresh run starts from an empty directory; only previous run
// directories are cleared.
void prepare_output(const fs::path& out, bool resume) {
  if (resume) {
    fs::create_directories(out);
    return;
  }
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!fs::exists(out / "manifest.json") && !fs::exists(out / "jobs.json"))
      throw std::runtime_error("output directory " + out.string() + " is not empty and holds no previous run");
    fs::remove_all(out);
  }
  fs::create_directories(out);
}

struct Session {
  const RunConfig& config;
  const RunOptions& options;
  fs::path out;
  Clock::time_point start = Clock::now();
  RunManifest manifest;
  RunOutcome outcome;

  Session(const RunConfig& c, const RunOptions& o) : config(c), options(o) {
    out = o.output.empty() ? fs::path(c.output) : o.output;
    prepare_output(out, o.resume);
    manifest.config_hash = sha256_hex(c.canonical_json());
    manifest.kind = to_string(c.kind);
    manifest.seed = c.noise_seed;
    outcome.output = out;
    write_text(out / "config.json", json::parse(c.canonical_json()).dump(2) + "\n");
  }

  void log(const std::string& msg) const {
    if (!options.quiet) fmt::print(stderr, "[npns {}] {}\n", to_string(config.kind), msg);
  }

  void check(const std::string& name, const std::string& status) {
    manifest.checks[name] = status;
    outcome.checks[name] = status;
    if (status == "fail") outcome.exit_code = kExitCheckFailure;
  }

  RunOutcome finish() {
    manifest.wall_clock_seconds = seconds_since(start);
    manifest.complete = outcome.complete;
    if (!outcome.complete) outcome.exit_code = kExitCheckFailure;
    write_manifest(out, manifest);
    return outcome;
  }
};

NpnsState member(const RunConfig& c, const Grid& g, int offset) {
  return ensemble_member(g, c.ensemble, (c.initial_index + offset) % c.ensemble.count);
}

std::vector<DiagnosticsRecord> run_diagnostics(const NpnsState& x0, const PhysicalParams& params,
                                               const WienerPath& path, double epsilon, double t_end,
                                               IntegratorConfig cfg) {
  cfg.snapshot_stride = 0;
  cfg.record_diagnostics = true;
  const NpnsState start = to_transformed(x0, z_of(path, x0.time, epsilon));
  return integrate(start, params, Noise{&path, epsilon}, t_end, cfg).diagnostics;
}

std::vector<double> row_residuals(const CheckReport& r) {
  std::vector<double> out;
  for (const auto& row : r.rows) out.push_back(row.residual);
  return out;
}

}  // namespace

RunOutcome cmd_simulate(const RunConfig& c, const RunOptions& o) {
  Session s(c, o);
  const Grid g = c.grid();
  const PhysicalParams params = c.physical_params();
  const WienerPath path = c.noise_path();
  const NpnsState x0 = member(c, g, 0);
  const NpnsState start = to_transformed(x0, z_of(path, 0.0, c.epsilon));
  s.log(fmt::format("n = {}, eps = {}, dt = {}, t_end = {}", c.n, c.epsilon, c.integrator.dt, c.t_end));
  const auto t0 = Clock::now();
  const Trajectory traj = integrate(start, params, Noise{&path, c.epsilon}, c.t_end, c.integrator);
  s.manifest.job_seconds["integrate"] = seconds_since(t0);

  write_text(s.out / "diagnostics.csv", to_text([&](std::ostream& os) { write_diagnostics_csv(os, traj.diagnostics); }));
  write_text(s.out / "path.csv", to_text([&](std::ostream& os) { path.write_csv(os); }));
  if (c.integrator.snapshot_stride > 0) {
    const double h = c.t_end / std::ceil(c.t_end / c.integrator.dt - 1e-9);
    for (const auto& snap : traj.snapshots)
      write_state(s.out / "snapshots" / fmt::format("step_{:08d}.bin", std::lround(snap.time / h)), snap,
                  Precision::complex64);
  }
  const NpnsState& end = traj.final_state();
  write_state(s.out / "final_state.bin", to_physical_gauge(end, z_of(path, end.time, c.epsilon)),
              Precision::complex128);
  s.check("simulate", "pass");
  return s.finish();
}

RunOutcome cmd_verify(const RunConfig& c, const RunOptions& o) {
  const auto& v = c.verify;
  if (!v.trajectory.empty() && v.runs != 1)
    throw ConfigError({"verify.trajectory replays a single run; set verify.runs = 1"});
  std::vector<DiagnosticsRecord> stored;
  if (!v.trajectory.empty()) {
    const RunManifest m = read_manifest(v.trajectory);
    verify_checksums(v.trajectory, m);
    std::ifstream is(fs::path(v.trajectory) / "diagnostics.csv");
    stored = read_diagnostics_csv(is);
  }
  Session s(c, o);
  const Grid g = c.grid();
  const PhysicalParams params = c.physical_params();
  const WienerPath path = c.noise_path();
  const double dt = c.integrator.dt;
  const double coupling = v.coupling_constant > 0.0 ? v.coupling_constant : 1.0 / (c.eps0 * c.eps0);
  const double force_l2 = norm_l2(params.force);

  struct RunResult {
    std::vector<CheckReport> reports;
    double c_mass = 0.0, c_velocity = 0.0, tol_mass = 1e-8, tol_velocity = 1e-8;
    double gradient_a = 0.0;
    double seconds = 0.0;
    std::string diagnostics_csv;
  };
  s.log(fmt::format("{} run(s), calibrate = {}, workers = {}", v.runs, v.calibrate, o.workers));
  const auto results = parallel_map<RunResult>(static_cast<std::size_t>(v.runs), o.workers, [&](std::size_t i) {
    const auto t0 = Clock::now();
    RunResult r;
    const NpnsState x0 = member(c, g, static_cast<int>(i));
    const auto diag = !stored.empty() && i == 0 ? stored : run_diagnostics(x0, params, path, c.epsilon, c.t_end, c.integrator);
    VelocityEnergyOptions vo;
    vo.nu = c.nu;
    vo.force_l2 = force_l2;
    vo.coupling_constant = coupling;
    if (v.calibrate) {
      IntegratorConfig half = c.integrator;
      half.dt = dt / 2.0;
      const auto fine = subsample(run_diagnostics(x0, params, path, c.epsilon, c.t_end, half), 2);
      if (fine.size() != diag.size()) throw std::runtime_error("calibration runs do not share sample times");
      r.c_mass = calibrate_check_constant(row_residuals(check_mass_dissipation(diag, c.dcoef, 0.0)),
                                          row_residuals(check_mass_dissipation(fine, c.dcoef, 0.0)), dt);
      r.c_velocity = calibrate_check_constant(velocity_energy_residuals(diag, vo), velocity_energy_residuals(fine, vo), dt);
      r.tol_mass = inequality_tolerance(r.c_mass, dt);
      r.tol_velocity = inequality_tolerance(r.c_velocity, dt);
    }
    vo.tol = r.tol_velocity;
    r.reports.push_back(check_mass_dissipation(diag, c.dcoef, r.tol_mass));
    r.reports.push_back(check_decay_H(diag, c.dcoef, v.delta + dt));
    r.reports.push_back(check_velocity_energy(diag, vo));
    r.reports.push_back(check_gradient_decay_V(diag));
    r.reports.push_back(check_time_averaged_bound(diag, v.window, c.eps0));
    const CheckReport& grad = r.reports[3];
    if (grad.fitted.count("envelope_A")) {
      r.gradient_a = grad.fitted.at("envelope_A");
    } else {
      for (const auto& row : grad.rows) r.gradient_a = std::max(r.gradient_a, row.lhs);
    }
    r.diagnostics_csv = to_text([&](std::ostream& os) { write_diagnostics_csv(os, diag); });
    r.seconds = seconds_since(t0);
    return r;
  });

  json summary;
  summary["note"] = "time-averaged integral uses 1/eps0 (Debye parameter) in the cubic term";
  summary["coupling_constant"] = coupling;
  auto& runs = summary["runs"] = json::array();
  double gradient_a = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const fs::path dir = s.out / fmt::format("run_{:03d}", i);
    write_text(dir / "diagnostics.csv", r.diagnostics_csv);
    for (const auto& rep : r.reports) {
      write_text(dir / ("check_" + rep.name + ".csv"), to_text([&](std::ostream& os) { write_check_csv(os, rep); }));
      s.check(fmt::format("run_{:03d}/{}", i, rep.name), to_string(rep.status));
    }
    json entry;
    entry["run"] = i;
    entry["member"] = (c.initial_index + static_cast<int>(i)) % c.ensemble.count;
    entry["calibration"] = {{"c_check_mass", r.c_mass},
                            {"tol_mass", r.tol_mass},
                            {"c_check_velocity", r.c_velocity},
                            {"tol_velocity", r.tol_velocity}};
    entry["checks"] = json::parse(reports_summary_json(r.reports, ""))["checks"];
    runs.push_back(std::move(entry));
    s.manifest.job_seconds[fmt::format("run_{:03d}", i)] = r.seconds;
    gradient_a = std::max(gradient_a, r.gradient_a);
  }
  if (v.calibrate) {
    json cal = json::array();
    for (std::size_t i = 0; i < results.size(); ++i)
      cal.push_back({{"run", i},
                     {"dt", dt},
                     {"c_check_mass", results[i].c_mass},
                     {"c_check_velocity", results[i].c_velocity}});
    write_text(s.out / "calibration.json", cal.dump(2) + "\n");
  }

  if (v.radii || v.absorption) {
    // R0 must cover |sigma| and |rho| for all later times: the conserved
    // mean plus the largest initial fluctuation.
    const double mean_norm = 2.0 * kPi * std::abs(c.ensemble.sigma_mean);
    double fluct = 0.0;
    const int members = std::max(v.runs, v.absorption ? v.absorption_samples : 0);
    std::vector<NpnsState> data;
    for (int i = 0; i < members; ++i) {
      data.push_back(member(c, g, i));
      SpectralField f = data.back().sigma;
      f.set_mean_free(true);
      fluct = std::max(fluct, std::pow(norm_l2(f), 2) + std::pow(norm_l2(data.back().rho), 2));
    }
    const double r0 = v.r0 > 0.0 ? v.r0 : std::sqrt(mean_norm * mean_norm + fluct);
    if (r0 < mean_norm)
      throw ConfigError({fmt::format("verify.r0 = {} is below |mean sigma| = {:.6g}; no ball of that radius can absorb",
                                     r0, mean_norm)});
    RadiiInputs in;
    in.nu = c.nu;
    in.dcoef = c.dcoef;
    in.force_l2 = force_l2;
    in.r0 = r0;
    in.gradient_bound_a = v.gradient_bound > 0.0 ? v.gradient_bound : gradient_a;
    in.coupling_constant = coupling;
    const double t_trunc = v.t_truncate < 0.0 ? v.t_truncate : -std::log(1e12) / c.nu - 1.0;
    const AbsorbingRadii radii = compute_absorbing_radii(path, c.epsilon, t_trunc, in);
    json jr = {{"r0", radii.r0},   {"A", in.gradient_bound_a}, {"r1", radii.r1}, {"r2", radii.r2},
               {"r_f", radii.r_f}, {"R1", radii.R1},           {"R2", radii.R2}, {"R3", radii.R3},
               {"R4", radii.R4},   {"R5", radii.R5},           {"r3", radii.r3}, {"r4", radii.r4},
               {"r5", radii.r5},   {"r6", radii.r6},           {"kappa", radii.kappa},
               {"t_truncate", radii.t_truncate},
               {"h_ball", radii.h_ball()},
               {"v_ball", radii.v_ball()}};
    jr["truncation_tail_bound"] = std::isfinite(radii.truncation_tail_bound) ? json(radii.truncation_tail_bound) : json(nullptr);
    summary["radii"] = jr;
    write_text(s.out / "radii.json", jr.dump(2) + "\n");

    if (v.absorption) {
      const auto t0 = Clock::now();
      const double e_ball = v.ball_factor * radii.h_ball();
      std::vector<NpnsState> big;
      for (int i = 0; i < v.absorption_samples; ++i) big.push_back(with_h_norm(data[static_cast<std::size_t>(i)], e_ball));
      s.log(fmt::format("absorption: {} samples at |x0| = {:.4g}, ball {:.4g}", big.size(), e_ball, radii.h_ball()));
      const AbsorptionReport ab =
          verify_absorption(path, c.epsilon, params, big, v.absorption_levels, radii.h_ball(), c.integrator, o.workers);
      std::string csv = "sample,t0,norm_h,radius,inside\n";
      for (std::size_t i = 0; i < ab.samples.size(); ++i)
        for (std::size_t j = 0; j < ab.samples[i].t0.size(); ++j)
          csv += fmt::format("{},{:.17g},{:.17g},{:.17g},{}\n", i, ab.samples[i].t0[j], ab.samples[i].norm_h[j],
                             ab.radius, ab.samples[i].norm_h[j] <= ab.radius ? 1 : 0);
      write_text(s.out / "absorption.csv", csv);
      summary["absorption"] = {{"radius", ab.radius},
                               {"initial_norm", e_ball},
                               {"entry_time", std::isfinite(ab.entry_time) ? json(ab.entry_time) : json(nullptr)},
                               {"passed", ab.passed}};
      s.check("absorption", ab.passed ? "pass" : "fail");
      s.manifest.job_seconds["absorption"] = seconds_since(t0);
    }
  }
  write_text(s.out / "summary.json", summary.dump(2) + "\n");
  return s.finish();
}

RunOutcome cmd_pullback(const RunConfig& c, const RunOptions& o) {
  Session s(c, o);
  const Grid g = c.grid();
  const PhysicalParams params = c.physical_params();
  const WienerPath path = c.noise_path();
  JobLedger ledger(s.out, s.manifest.config_hash, o.resume);
  AttractorCloud cloud;
  if (ledger.done("cloud")) {
    cloud = load_cloud(s.out / "cloud");
    s.log("cloud loaded from a previous session");
  } else if (o.max_jobs == 0) {
    s.outcome.complete = false;
    return s.finish();
  } else {
    CloudConfig cc;
    cc.t0_levels = c.pullback_levels;
    cc.initial_data = make_ensemble(g, c.ensemble);
    for (int i = 0; i < c.ensemble.count; ++i)
      cc.provenance.push_back(fmt::format("ensemble seed {} member {}", c.ensemble.seed, i));
    cc.integrator = c.integrator;
    cc.workers = o.workers;
    const auto t0 = Clock::now();
    cloud = build_cloud(c.epsilon, path, params, cc);
    s.manifest.job_seconds["cloud"] = seconds_since(t0);
    save_cloud(s.out / "cloud", cloud);
    ledger.mark_done("cloud");
  }
  double max_norm = 0.0;
  for (const auto& p : cloud.points) max_norm = std::max(max_norm, norm_h(p));
  json j = {{"epsilon", cloud.epsilon},
            {"pullback_time", cloud.pullback_time},
            {"displacement", cloud.displacement},
            {"gauge", std::isfinite(cloud.gauge) ? json(cloud.gauge) : json(nullptr)},
            {"converged", cloud.converged},
            {"max_norm_h", max_norm}};
  write_text(s.out / "cloud_summary.json", j.dump(2) + "\n");
  s.check("cloud_converged", cloud.converged ? "pass" : "not-converged");
  return s.finish();
}

RunOutcome cmd_sweep(const RunConfig& c, const RunOptions& o) {
  Session s(c, o);
  const Grid g = c.grid();
  const PhysicalParams params = c.physical_params();
  const WienerPath path = c.noise_path();
  JobLedger ledger(s.out, s.manifest.config_hash, o.resume);
  CloudConfig cc;
  cc.t0_levels = c.pullback_levels;
  cc.initial_data = make_ensemble(g, c.ensemble);
  for (int i = 0; i < c.ensemble.count; ++i)
    cc.provenance.push_back(fmt::format("ensemble seed {} member {}", c.ensemble.seed, i));
  cc.integrator = c.integrator;
  cc.workers = o.workers;

  long budget = o.max_jobs;
  auto obtain = [&](const std::string& job, const fs::path& dir, double eps) -> std::optional<AttractorCloud> {
    if (ledger.done(job) && fs::exists(dir / "index.json")) return load_cloud(dir);
    if (budget == 0) return std::nullopt;
    if (budget > 0) --budget;
    s.log(fmt::format("building cloud {} (eps = {})", job, eps));
    const auto t0 = Clock::now();
    AttractorCloud cloud = build_cloud(eps, path, params, cc);
    s.manifest.job_seconds[job] = seconds_since(t0);
    save_cloud(dir, cloud);
    ledger.mark_done(job);
    return cloud;
  };

  const auto reference = obtain("reference", s.out / "reference", 0.0);
  std::vector<AttractorCloud> clouds;
  bool complete = reference.has_value();
  for (std::size_t k = 0; k < c.sweep_epsilons.size() && complete; ++k) {
    const auto cloud = obtain(fmt::format("eps_{:02d}", k), s.out / fmt::format("cloud_{:02d}", k), c.sweep_epsilons[k]);
    if (!cloud) complete = false;
    else clouds.push_back(*cloud);
  }
  if (!complete) {
    s.log("stopped before all clouds were built; rerun with --resume");
    s.outcome.complete = false;
    return s.finish();
  }
  const SweepResult sweep = assemble_sweep(*reference, clouds, c.sweep_fraction);
  write_text(s.out / "sweep.csv", to_text([&](std::ostream& os) { write_sweep_csv(os, sweep); }));
  json rows = json::array();
  for (const auto& r : sweep.rows)
    rows.push_back({{"epsilon", r.epsilon},
                    {"distance", r.distance},
                    {"gauge", std::isfinite(r.gauge) ? json(r.gauge) : json(nullptr)},
                    {"converged", r.converged}});
  json j = {{"fraction", sweep.fraction},
            {"passed", sweep.passed},
            {"indicative_only", sweep.indicative_only},
            {"reference_gauge", std::isfinite(sweep.reference.gauge) ? json(sweep.reference.gauge) : json(nullptr)},
            {"rows", rows}};
  write_text(s.out / "sweep.json", j.dump(2) + "\n");
  s.check("sweep", sweep.passed ? "pass" : "fail");
  s.check("sweep_clouds", sweep.indicative_only ? "indicative-only" : "pass");
  return s.finish();
}

RunOutcome cmd_convergence(const RunConfig& c, const RunOptions& o) {
  Session s(c, o);
  const Grid g = c.grid();
  const PhysicalParams params = c.physical_params();
  const WienerPath path = c.noise_path();
  const auto t0 = Clock::now();
  const ConvergenceTable table = pathwise_convergence_check(c.convergence_epsilons, path, params, member(c, g, 0),
                                                            c.convergence_t_final, c.integrator, o.workers);
  s.manifest.job_seconds["convergence"] = seconds_since(t0);
  write_text(s.out / "convergence.csv", to_text([&](std::ostream& os) { write_convergence_csv(os, table); }));
  json j = {{"slope", std::isfinite(table.slope) ? json(table.slope) : json(nullptr)},
            {"monotone", table.monotone},
            {"passed", table.passed}};
  if (!table.note.empty()) j["note"] = table.note;
  write_text(s.out / "convergence.json", j.dump(2) + "\n");
  s.check("convergence", table.passed ? "pass" : "fail");
  return s.finish();
}

RunOutcome run_experiment(const RunConfig& c, const RunOptions& o) {
  switch (c.kind) {
    case Kind::simulate: return cmd_simulate(c, o);
    case Kind::verify: return cmd_verify(c, o);
    case Kind::pullback: return cmd_pullback(c, o);
    case Kind::sweep: return cmd_sweep(c, o);
    case Kind::convergence: return cmd_convergence(c, o);
  }
  throw std::logic_error("unknown experiment kind");
}

}  // namespace npns
