#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>

#include "npns/attractor.hpp"
#include "npns/initial_data.hpp"
#include "test_support.hpp"

using namespace npns;

namespace {

// State whose only content is a constant sigma = c, so |x|_H = 2 pi |c|.
NpnsState constant_state(const Grid& g, double c) {
  NpnsState s(g);
  s.sigma.set_mode(0, 0, c);
  return s;
}

std::vector<NpnsState> line_cloud(const Grid& g, std::initializer_list<double> cs) {
  std::vector<NpnsState> out;
  for (double c : cs) out.push_back(constant_state(g, c));
  return out;
}

CloudConfig cloud_config(const Grid& g, int count, std::vector<double> levels, double dt = 5e-3) {
  EnsembleSpec spec;
  spec.count = count;
  spec.seed = 11;
  spec.velocity_norm = 3.0;
  CloudConfig c;
  c.t0_levels = std::move(levels);
  c.initial_data = make_ensemble(g, spec);
  c.integrator.dt = dt;
  return c;
}

}  // namespace

TEST_CASE("semi-distance on synthetic clouds") {
  Grid g(8);
  const auto a = line_cloud(g, {0.0, 1.0, 4.0});
  const auto b = line_cloud(g, {0.5, 3.0});
  CHECK(semi_distance(a, a).value == 0.0);
  const SemiDistanceResult r = semi_distance(a, b);
  CHECK(r.value == doctest::Approx(2.0 * kPi * 1.0).epsilon(1e-14));
  CHECK(r.worst == 2);
  CHECK(r.nearest == 1);
  // Exhaustive enumeration in the other direction: 0.5 -> 0 or 1, 3 -> 4.
  CHECK(semi_distance(b, a).value == doctest::Approx(2.0 * kPi * 1.0).epsilon(1e-14));

  const auto sub = line_cloud(g, {0.0, 4.0});
  CHECK(semi_distance(sub, a).value == 0.0);
  CHECK(semi_distance(a, sub).value > 0.0);
  CHECK(hausdorff_distance(a, sub) == semi_distance(a, sub).value);
  CHECK_THROWS_AS(semi_distance(std::vector<NpnsState>{}, a), std::invalid_argument);
  CHECK_THROWS_AS(semi_distance(a, line_cloud(Grid(16), {1.0})), std::invalid_argument);

  // dist(A, C) <= dist(A, B) + Hausdorff(B, C) on random clouds, both metrics.
  std::mt19937_64 rng(5);
  auto random_cloud = [&](int n) {
    std::vector<NpnsState> c;
    for (int i = 0; i < n; ++i)
      c.emplace_back(testing::random_solenoidal(g, 2, rng), testing::random_field(g, 2, rng),
                     testing::random_field(g, 2, rng));
    return c;
  };
  for (int trial = 0; trial < 5; ++trial) {
    const auto A = random_cloud(4), B = random_cloud(3), C = random_cloud(5);
    for (Metric m : {Metric::H, Metric::V})
      CHECK(semi_distance(A, C, m).value <= semi_distance(A, B, m).value + hausdorff_distance(B, C, m) + 1e-12);
  }
}

TEST_CASE("deterministic clouds collapse to the known attractor") {
  Grid g(16);
  PhysicalParams unforced(g);
  EnsembleSpec spec;
  spec.count = 4;
  spec.sigma_mean = 0.0;
  CloudConfig c;
  c.t0_levels = {-2.0, -4.0, -8.0};
  c.initial_data = make_ensemble(g, spec);
  c.integrator.dt = 1e-2;
  const WienerPath w = WienerPath::sample(1, -10.0, 1.0, 1e-3);
  const AttractorCloud origin = build_cloud(0.0, w, unforced, c);
  // Poincare: every component decays at least like e^{-t}.
  for (std::size_t i = 0; i < origin.points.size(); ++i)
    CHECK(norm_h(origin.points[i]) <= std::exp(-8.0) * norm_h(c.initial_data[i]));
  CHECK(origin.displacement[1] < origin.displacement[0]);
  CHECK(origin.converged);

  // Single-mode shear forcing: the steady state u* = f / nu.
  PhysicalParams forced(1.0, 1.0, 1.0, shear_force(g, 0.5));
  for (auto& s : c.initial_data) s = NpnsState(s.velocity, SpectralField(g), SpectralField(g));
  c.t0_levels = {-4.0, -8.0, -16.0};
  const AttractorCloud steady = build_cloud(0.0, w, forced, c);
  NpnsState target(forced.force, SpectralField(g), SpectralField(g));
  for (const auto& p : steady.points) CHECK(distance_h(p, target) <= 1e-5 * norm_h(target));
  CHECK(steady.converged);
  CHECK(steady.gauge <= 1e-3 * norm_h(target));
}

TEST_CASE("stochastic cloud displacement shrinks with the pullback time") {
  Grid g(16);
  PhysicalParams p(1.0, 1.0, 1.0, shear_force(g, 1.0));
  const WienerPath w = WienerPath::sample(21, -16.0, 1.0, 1e-3);
  const CloudConfig c = cloud_config(g, 8, {-2.0, -4.0, -8.0, -16.0}, 1e-2);
  const AttractorCloud cloud = build_cloud(0.1, w, p, c);
  REQUIRE(cloud.displacement.size() == 3);
  INFO(cloud.displacement[0] << " " << cloud.displacement[1] << " " << cloud.displacement[2]);
  CHECK(cloud.displacement[1] < cloud.displacement[0]);
  CHECK(cloud.displacement[2] < cloud.displacement[1]);
  CHECK(cloud.converged);
  CHECK(cloud.points.size() == 8);
  for (const auto& pt : cloud.points) {
    CHECK(pt.time == 0.0);
    CHECK(pt.gauge == Gauge::physical);
  }

  // The worker count does not change the cloud.
  CloudConfig parallel = c;
  parallel.workers = 3;
  const AttractorCloud again = build_cloud(0.1, w, p, parallel);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) CHECK(again.points[i] == cloud.points[i]);
  CHECK(again.gauge == cloud.gauge);

  const auto dir = std::filesystem::temp_directory_path() / "npns_cloud_test";
  std::filesystem::remove_all(dir);
  save_cloud(dir, cloud);
  const AttractorCloud loaded = load_cloud(dir);
  CHECK(loaded.points.size() == cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    CHECK(loaded.points[i].velocity == cloud.points[i].velocity);
    CHECK(loaded.points[i].sigma == cloud.points[i].sigma);
  }
  CHECK(loaded.gauge == cloud.gauge);
  CHECK(loaded.provenance == cloud.provenance);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pathwise convergence in epsilon") {
  Grid g(16);
  PhysicalParams p(1.0, 1.0, 1.0, shear_force(g, 1.0));
  const WienerPath w = WienerPath::sample(31, -1.0, 2.0, 1e-3);
  EnsembleSpec spec;
  spec.velocity_norm = 3.0;
  const NpnsState x0 = ensemble_member(g, spec, 0);
  IntegratorConfig cfg;
  cfg.dt = 5e-3;
  const ConvergenceTable t = pathwise_convergence_check({0.4, 0.2, 0.1, 0.05, 0.0}, w, p, x0, 1.0, cfg);
  CHECK(t.rows.back().error == 0.0);
  INFO("slope " << t.slope);
  CHECK(t.monotone);
  CHECK(t.slope >= 0.7);
  CHECK(t.slope <= 1.3);
  CHECK(t.passed);

  std::vector<double> zeros(21, 0.0);
  const WienerPath flat = WienerPath::from_samples(0.1, -10, zeros);
  const ConvergenceTable z = pathwise_convergence_check({0.4, 0.2}, flat, p, x0, 1.0, cfg);
  for (const auto& r : z.rows) CHECK(r.error == 0.0);
  CHECK_FALSE(z.passed);
}

TEST_CASE("upper semicontinuity sweep: trivial cases") {
  Grid g(8);
  const WienerPath w = WienerPath::sample(41, -8.0, 1.0, 1e-3);
  PhysicalParams forced(1.0, 1.0, 1.0, shear_force(g, 1.0));
  const CloudConfig c = cloud_config(g, 3, {-2.0, -4.0, -8.0}, 1e-2);
  const SweepResult zero = upper_semicontinuity_sweep({0.0}, w, forced, c);
  REQUIRE(zero.rows.size() == 1);
  CHECK(zero.rows[0].distance == 0.0);

  PhysicalParams unforced(g);
  const SweepResult flat = upper_semicontinuity_sweep({0.5, 0.1}, w, unforced, c);
  for (const auto& r : flat.rows) CHECK(r.distance <= std::max(r.gauge, 1e-10));
  std::ostringstream csv;
  write_sweep_csv(csv, flat);
  CHECK(csv.str().rfind("epsilon,distance,gauge,converged,worst,nearest\n", 0) == 0);
}
