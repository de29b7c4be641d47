#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <sstream>

#include "npns/estimates.hpp"
#include "npns/initial_data.hpp"

using namespace npns;

namespace {

// sigma = cos x, u = rho = 0.
NpnsState heat_state(const Grid& g) {
  return NpnsState(VectorField(g), SpectralField::from_function(g, [](double x, double) { return std::cos(x); }),
                   SpectralField(g));
}

std::vector<DiagnosticsRecord> run(const NpnsState& s, const PhysicalParams& p, double t_end, double dt,
                                   const Noise& noise = {}) {
  IntegratorConfig cfg;
  cfg.dt = dt;
  return integrate(s, p, noise, t_end, cfg).diagnostics;
}

std::vector<double> residuals(const CheckReport& r) {
  std::vector<double> out;
  for (const auto& row : r.rows) out.push_back(row.residual);
  return out;
}

EnsembleSpec spec_for(std::uint64_t seed) {
  EnsembleSpec spec;
  spec.seed = seed;
  spec.velocity_norm = 2.0;
  return spec;
}

}  // namespace

TEST_CASE("zero fields give zero residuals and trivial bounds") {
  Grid g(8);
  const PhysicalParams p(g);
  const auto diag = run(NpnsState(g), p, 0.1, 0.01);
  const CheckReport m = check_mass_dissipation(diag, 1.0, 1e-8);
  CHECK(m.status == CheckStatus::pass);
  for (const auto& row : m.rows) CHECK(row.residual == 0.0);
  CHECK(check_decay_H(diag, 1.0, 1e-3).status == CheckStatus::pass);
  const CheckReport grad = check_gradient_decay_V(diag);
  CHECK(grad.status == CheckStatus::pass);
  CHECK(grad.note.find("skipped") != std::string::npos);
  const CheckReport avg = check_time_averaged_bound(diag, 0.05, 1.0);
  CHECK(avg.status == CheckStatus::report_only);
  for (const auto& row : avg.rows) CHECK(row.lhs == 0.0);
  CHECK_THROWS_AS(check_mass_dissipation({}, 1.0, 1e-8), std::invalid_argument);
}

TEST_CASE("pure diffusion: dissipation residual matches the discrete mismatch") {
  Grid g(16);
  PhysicalParams p(g);
  p.dcoef = 0.5;
  const double y0 = 2.0 * kPi * kPi;  // ||cos x||^2 = ||grad cos x||^2
  double previous = 0.0;
  for (double h : {0.1, 0.05, 0.025}) {
    const auto diag = run(heat_state(g), p, 1.0, h);
    const CheckReport r = check_mass_dissipation(diag, p.dcoef, 1e-8);
    double worst = 0.0;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      const double t = diag[i].time;
      const double lam = 2.0 * p.dcoef;
      const double expected =
          y0 * std::exp(-lam * t) * ((std::exp(-lam * h) - 1.0) / h + 0.5 * lam * (1.0 + std::exp(-lam * h)));
      CHECK(std::abs(r.rows[i].residual - expected) <= 1e-10 * y0);
      worst = std::max(worst, std::abs(r.rows[i].residual));
    }
    if (previous > 0.0) CHECK(std::abs(std::log2(previous / worst) - 2.0) <= 0.3);
    previous = worst;
  }
}

TEST_CASE("decay bound is saturated by the Poincare-sharp mode") {
  Grid g(16);
  PhysicalParams p(g);
  p.dcoef = 0.7;
  const auto diag = run(heat_state(g), p, 2.0, 0.01);
  const CheckReport r = check_decay_H(diag, p.dcoef, 1e-3 + 0.01);
  CHECK(r.status == CheckStatus::pass);
  CHECK(std::abs(r.fitted.at("max_ratio") - 1.0) <= 1e-12);
  // A mean does not decay; the check works on the fluctuation.
  NpnsState shifted = heat_state(g);
  shifted.sigma.set_mode(0, 0, 2.0);
  CHECK(check_decay_H(run(shifted, p, 2.0, 0.01), p.dcoef, 1e-3).status == CheckStatus::pass);
}

TEST_CASE("decay bound on generic runs, and positivity loss voids the hypothesis") {
  Grid g(16);
  PhysicalParams p(1.0, 1.0, 1.0, shear_force(g, 1.0));
  for (std::uint64_t seed : {1u, 2u}) {
    const auto diag = run(ensemble_member(g, spec_for(seed), 0), p, 2.0, 2e-3);
    const CheckReport r = check_decay_H(diag, p.dcoef, 1e-3 + 2e-3);
    CHECK(r.status == CheckStatus::pass);
    CHECK(r.fitted.at("max_ratio") <= 1.0 + 1e-12);
    CHECK(r.rows.back().lhs < r.rows.back().rhs);
  }
  std::vector<DiagnosticsRecord> diag(3);
  for (int i = 0; i < 3; ++i) {
    diag[i].time = i;
    diag[i].l2_sigma_fluct = 1.0;  // does not decay: would fail
    diag[i].l2_rho = 0.5;
    diag[i].max_sigma = 1.0;
    diag[i].min_sigma = -0.2;
  }
  CHECK(check_decay_H(diag, 1.0, 1e-3).status == CheckStatus::hypothesis_void);
  for (auto& d : diag) d.l2_rho = 0.0;
  CHECK(check_decay_H(diag, 1.0, 1e-3).status == CheckStatus::fail);
}

TEST_CASE("dissipation inequality with calibrated tolerance") {
  Grid g(16);
  PhysicalParams p(1.0, 1.0, 1.0, shear_force(g, 1.0));
  const NpnsState s = ensemble_member(g, spec_for(3), 0);
  const double dt = 4e-3;
  const auto coarse = run(s, p, 1.0, dt);
  const auto fine = subsample(run(s, p, 1.0, dt / 2), 2);
  REQUIRE(fine.size() == coarse.size());
  const double c = calibrate_check_constant(residuals(check_mass_dissipation(coarse, p.dcoef, 1.0)),
                                            residuals(check_mass_dissipation(fine, p.dcoef, 1.0)), dt);
  CHECK(c > 0.0);
  const double tol = inequality_tolerance(c, dt);
  const CheckReport r = check_mass_dissipation(coarse, p.dcoef, tol);
  INFO("worst residual " << r.worst_residual << " tol " << tol);
  CHECK(r.status == CheckStatus::pass);
  // The coupling makes the inequality strict when rho != 0.
  CHECK(r.worst_residual < 0.0);
}

TEST_CASE("velocity energy: clean decay and the forced steady state") {
  Grid g(16);
  PhysicalParams free(g);
  NpnsState flow(ensemble_member(g, spec_for(4), 0).velocity, SpectralField(g), SpectralField(g));
  const auto diag = run(flow, free, 1.0, 1e-2);
  VelocityEnergyOptions o;
  const CheckReport r = check_velocity_energy(diag, o);
  CHECK(r.status == CheckStatus::pass);
  for (std::size_t i = 0; i < diag.size(); ++i)
    CHECK(r.rows[i].rhs == doctest::Approx(std::exp(-(diag[i].time)) * r.rows[0].lhs).epsilon(1e-12));

  PhysicalParams forced(1.0, 1.0, 1.0, shear_force(g, 0.8));
  const auto steady = run(NpnsState(g), forced, 12.0, 1e-2);
  o.force_l2 = norm_l2(forced.force);
  const CheckReport s = check_velocity_energy(steady, o);
  CHECK(s.status == CheckStatus::pass);
  // Steady state u* = f / (nu |k|^2) with |k| = 1.
  const double target = std::pow(norm_l2(forced.force), 2);
  CHECK(std::abs(std::pow(steady.back().l2_u, 2) - target) <= 1e-4 * target);
  CHECK(s.rows.back().rhs == doctest::Approx(2.0 * target * (1.0 - std::exp(-12.0))).epsilon(1e-4));
}

TEST_CASE("velocity energy on stochastic runs") {
  Grid g(16);
  PhysicalParams p(1.0, 1.0, 1.0, shear_force(g, 1.0));
  VelocityEnergyOptions o;
  o.force_l2 = norm_l2(p.force);
  for (double eps : {0.05, 0.2}) {
    const WienerPath w = WienerPath::sample(101, -1.0, 3.0, 1e-3);
    NpnsState s = to_transformed(ensemble_member(g, spec_for(5), 1), 1.0);
    const double dt = 4e-3;
    const auto coarse = run(s, p, 2.0, dt, Noise{&w, eps});
    const auto fine = subsample(run(s, p, 2.0, dt / 2, Noise{&w, eps}), 2);
    o.tol = inequality_tolerance(calibrate_check_constant(velocity_energy_residuals(coarse, o), velocity_energy_residuals(fine, o), dt), dt);
    const CheckReport r = check_velocity_energy(coarse, o);
    INFO("eps " << eps << " " << r.note);
    CHECK(r.status == CheckStatus::pass);
    CHECK(r.fitted.at("differential_worst_residual") <= o.tol);
  }
}

TEST_CASE("gradient decay rate of a single heat mode") {
  Grid g(16);
  PhysicalParams p(g);
  p.dcoef = 0.6;
  const CheckReport r = check_gradient_decay_V(run(heat_state(g), p, 5.0, 1e-2));
  CHECK(r.status == CheckStatus::pass);
  CHECK(std::abs(r.fitted.at("rate_a") - 2.0 * p.dcoef) <= 0.01 * 2.0 * p.dcoef);

  PhysicalParams forced(1.0, 1.0, 1.0, shear_force(g, 1.0));
  const CheckReport gen = check_gradient_decay_V(run(ensemble_member(g, spec_for(6), 0), forced, 4.0, 4e-3));
  CHECK(gen.status == CheckStatus::pass);
  CHECK(gen.fitted.at("slope_upper_95") < 0.0);
  CHECK(gen.fitted.at("envelope_A") > 0.0);

  CHECK(check_gradient_decay_V(run(heat_state(g), p, 0.05, 1e-2)).status == CheckStatus::inconclusive);
}

TEST_CASE("time-averaged integral of a heat mode in closed form") {
  Grid g(16);
  PhysicalParams p(g);
  p.dcoef = 0.5;
  const auto diag = run(heat_state(g), p, 4.0, 1e-2);
  const CheckReport r = check_time_averaged_bound(diag, 1.0, 1.0);
  REQUIRE(r.rows.size() == 4);
  const double y0 = 2.0 * kPi * kPi, lam = 2.0 * p.dcoef;
  for (const auto& row : r.rows) {
    const double exact = y0 * (std::exp(-lam * row.time) - std::exp(-lam * (row.time + 1.0))) / lam;
    CHECK(std::abs(row.lhs - exact) <= 0.01 * exact);
  }
  CHECK(r.fitted.at("monotone_tail") == 1.0);
  CHECK(r.fitted.at("rate") == doctest::Approx(lam).epsilon(1e-3));
}

TEST_CASE("absorbing radii") {
  const WienerPath w = WienerPath::sample(77, -50.0, 1.0, 1e-3);
  RadiiInputs in;
  in.nu = 1.0;
  in.dcoef = 0.8;
  in.r0 = 7.0;
  in.gradient_bound_a = 2.0;
  in.force_l2 = 3.0;

  const AbsorbingRadii det = compute_absorbing_radii(w, 0.0, -30.0, in);
  const double quad = 1e-3 * 1e-3 / 12.0 * 30.0;  // trapezoid error bound for e^{s}
  CHECK(std::abs(det.integral_nu - 1.0) <= det.truncation_tail_bound + quad);
  CHECK(std::abs(det.integral_half_nu - 2.0) <= 1e-12 + 2.0 * std::exp(-15.0) + quad);
  CHECK(det.R2 == in.r0 * in.r0 / (2.0 * in.dcoef));
  CHECK(det.R5 >= det.R2);
  CHECK(det.h_ball() == 2.0 * in.r0 + det.R1);

  const AbsorbingRadii coarse = compute_absorbing_radii(w, 0.1, -30.0, in);
  in.quadrature_substeps = 10;
  const AbsorbingRadii fine = compute_absorbing_radii(w, 0.1, -30.0, in);
  CHECK(std::abs(coarse.R1 - fine.R1) <= 1e-4 * fine.R1);
  CHECK(std::abs(coarse.integral_nu - fine.integral_nu) <= 1e-4 * fine.integral_nu);
  CHECK(std::isfinite(coarse.truncation_tail_bound));
  CHECK(coarse.truncation_tail_bound >= 0.0);

  in.quadrature_substeps = 1;
  const AbsorbingRadii wide = compute_absorbing_radii(w, 0.1, -40.0, in);
  CHECK(wide.r1 >= coarse.r1);
  CHECK(wide.r2 >= coarse.r2);
  CHECK(wide.r_f >= coarse.r_f);

  CHECK_THROWS_AS(compute_absorbing_radii(w, 0.1, -10.0, in), std::invalid_argument);
  const WienerPath fixed = WienerPath::from_samples(1.0, -5, {0.1, 0.2, 0.3, 0.1, 0.05, 0.0});
  CHECK_THROWS_AS(compute_absorbing_radii(fixed, 0.1, -30.0, in), std::invalid_argument);
}

TEST_CASE("absorption in the trivial regimes") {
  Grid g(8);
  const PhysicalParams p(g);
  const WienerPath w = WienerPath::sample(5, -8.0, 1.0, 1e-3);
  IntegratorConfig cfg;
  cfg.dt = 1e-2;
  const std::vector<double> levels{-1.0, -2.0, -4.0};
  const AbsorptionReport zero = verify_absorption(w, 0.3, p, {NpnsState(g)}, levels, 1.0, cfg);
  CHECK(zero.passed);
  CHECK(zero.entry_time == 1.0);

  EnsembleSpec spec = spec_for(8);
  spec.sigma_mean = 0.0;
  spec.count = 3;
  const auto data = make_ensemble(g, spec);
  const AbsorptionReport decay = verify_absorption(w, 0.0, p, data, levels, 0.5, cfg, 2);
  CHECK(decay.passed);
  for (const auto& s : decay.samples) {
    CHECK(s.norm_h[2] < s.norm_h[0]);
    CHECK(s.entered);
  }
  const AbsorptionReport tight = verify_absorption(w, 0.0, p, data, levels, 1e-12, cfg);
  CHECK_FALSE(tight.passed);
  CHECK(std::isinf(tight.entry_time));
  CHECK_THROWS(verify_absorption(w, 0.0, p, data, {-2.0, -1.0}, 1.0, cfg));
}

TEST_CASE("segmented pullback for large data") {
  Grid g(16);
  PhysicalParams p(g);
  p.force = shear_force(g, 1.0);
  const WienerPath w = WienerPath::sample(9, -3.0, 1.0, 1e-3);
  IntegratorConfig cfg;
  cfg.dt = 1e-2;
  EnsembleSpec spec = spec_for(16);
  const NpnsState small = ensemble_member(g, spec, 0);
  // Slow data: same step grid as the plain pullback.
  const NpnsState a = absorption_pullback(-1.0, w, 0.3, small, p, cfg);
  const NpnsState b = pullback_evaluate(-1.0, w, 0.3, small, p, cfg);
  CHECK(distance_h(a, b) <= 1e-10 * norm_h(b));
  CHECK(a.time == 0.0);
  CHECK(a.gauge == Gauge::physical);

  // Fast data: the plain pullback breaks the CFL limit, the segmented one adapts.
  const NpnsState big = with_h_norm(small, 2000.0);
  CHECK_THROWS_AS(pullback_evaluate(-2.0, w, 0.3, big, p, cfg), CflViolation);
  const NpnsState end = absorption_pullback(-2.0, w, 0.3, big, p, cfg);
  CHECK(norm_h(end) < 0.2 * norm_h(big));
  CHECK(std::abs(end.sigma.mean() - small.sigma.mean()) <= 1e-12);
}

TEST_CASE("report serialization") {
  CheckReport r;
  r.name = "demo";
  r.rows.push_back({0.5, 1.0, 2.0, -1.0, true});
  r.rows.push_back({1.5, 3.0, 2.0, 1.0, false});
  r.status = CheckStatus::fail;
  r.fitted["a"] = 0.25;
  std::ostringstream csv;
  write_check_csv(csv, r);
  CHECK(csv.str() == "time,lhs,rhs,residual,pass\n0.5,1,2,-1,1\n1.5,3,2,1,0\n");
  const auto j = nlohmann::json::parse(reports_summary_json({r}, "header"));
  CHECK(j["note"] == "header");
  CHECK(j["checks"][0]["status"] == "fail");
  CHECK(j["checks"][0]["violations"] == 1);
  CHECK(j["checks"][0]["fitted"]["a"] == 0.25);
  CHECK(inequality_tolerance(0.0, 1e-3) == 1e-8);
  CHECK(inequality_tolerance(1.0, 1e-3) == 1e-3);
}
