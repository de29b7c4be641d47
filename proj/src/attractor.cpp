#include "npns/attractor.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "npns/field_io.hpp"
#include "npns/parallel.hpp"

namespace npns {

namespace {

void check_levels(const std::vector<double>& levels) {
  if (levels.empty()) throw std::invalid_argument("t0 levels must not be empty");
  for (std::size_t j = 0; j < levels.size(); ++j)
    if (!(levels[j] < 0.0) || (j > 0 && !(levels[j] < levels[j - 1])))
      throw std::invalid_argument("t0 levels must be negative and decreasing");
}

double metric_distance(const NpnsState& a, const NpnsState& b, Metric m) {
  return m == Metric::H ? distance_h(a, b) : distance_v(a, b);
}

}  // namespace

AttractorCloud build_cloud(double epsilon, const WienerPath& path, const PhysicalParams& params,
                           const CloudConfig& config) {
  check_levels(config.t0_levels);
  if (config.initial_data.empty()) throw std::invalid_argument("initial ensemble must not be empty");
  if (!config.provenance.empty() && config.provenance.size() != config.initial_data.size())
    throw std::invalid_argument("provenance must have one entry per initial datum");
  const std::size_t levels = config.t0_levels.size();
  const std::size_t count = config.initial_data.size();
  const WienerPath window = path.seeded() ? path.covering(config.t0_levels.back(), 0.0) : path;
  const auto states = parallel_map<std::optional<NpnsState>>(count * levels, config.workers, [&](std::size_t job) {
    return std::optional<NpnsState>(pullback_evaluate(config.t0_levels[job % levels], window, epsilon,
                                                      config.initial_data[job / levels], params, config.integrator));
  });
  auto at = [&](std::size_t i, std::size_t j) -> const NpnsState& { return *states[i * levels + j]; };

  AttractorCloud cloud;
  cloud.epsilon = epsilon;
  cloud.seed = path.seeded() ? path.seed() : 0;
  cloud.t0_levels = config.t0_levels;
  cloud.pullback_time = config.t0_levels.back();
  cloud.provenance = config.provenance;
  if (cloud.provenance.empty())
    for (std::size_t i = 0; i < count; ++i) cloud.provenance.push_back(fmt::format("datum {}", i));
  double scale = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    cloud.points.push_back(at(i, levels - 1));
    scale = std::max(scale, norm_h(cloud.points.back()));
  }
  for (std::size_t j = 1; j < levels; ++j) {
    double d = 0.0;
    for (std::size_t i = 0; i < count; ++i) d = std::max(d, distance_h(at(i, j), at(i, j - 1)));
    cloud.displacement.push_back(d);
  }
  const auto& d = cloud.displacement;
  cloud.gauge = d.empty() ? std::numeric_limits<double>::infinity() : d.back();
  if (cloud.gauge <= 1e-12 * (1.0 + scale)) cloud.converged = true;
  else if (d.size() >= 2) cloud.converged = d.back() < d[d.size() - 2];
  return cloud;
}

const char* to_string(Metric metric) { return metric == Metric::H ? "H" : "V"; }

SemiDistanceResult semi_distance(const std::vector<NpnsState>& a, const std::vector<NpnsState>& b, Metric metric) {
  if (a.empty() || b.empty()) throw std::invalid_argument("semi_distance: empty cloud");
  const int n = a.front().grid().n();
  for (const auto& s : a)
    if (s.grid().n() != n) throw std::invalid_argument("semi_distance: clouds live on different grids");
  for (const auto& s : b)
    if (s.grid().n() != n) throw std::invalid_argument("semi_distance: clouds live on different grids");
  SemiDistanceResult r;
  r.metric = metric;
  r.value = -1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = metric_distance(a[i], b[j], metric);
      if (d < best) best = d, arg = j;
    }
    if (best > r.value) r.value = best, r.worst = i, r.nearest = arg;
  }
  return r;
}

SemiDistanceResult semi_distance(const AttractorCloud& a, const AttractorCloud& b, Metric metric) {
  return semi_distance(a.points, b.points, metric);
}

double hausdorff_distance(const std::vector<NpnsState>& a, const std::vector<NpnsState>& b, Metric metric) {
  return std::max(semi_distance(a, b, metric).value, semi_distance(b, a, metric).value);
}

ConvergenceTable pathwise_convergence_check(const std::vector<double>& epsilons, const WienerPath& path,
                                            const PhysicalParams& params, const NpnsState& x0, double t_final,
                                            const IntegratorConfig& config, int workers) {
  if (epsilons.empty()) throw std::invalid_argument("epsilon list must not be empty");
  if (!(t_final > 0.0)) throw std::invalid_argument("t_final must be positive");
  // Slot 0 is the deterministic reference.
  std::vector<double> eps{0.0};
  eps.insert(eps.end(), epsilons.begin(), epsilons.end());
  const WienerPath window = path.seeded() ? path.covering(0.0, t_final) : path;
  IntegratorConfig quiet = config;
  quiet.record_diagnostics = false;
  quiet.snapshot_stride = 0;
  const auto finals = parallel_map<std::optional<NpnsState>>(eps.size(), workers, [&](std::size_t k) {
    NpnsState start = to_transformed(x0, z_of(window, x0.time, eps[k]));
    return std::optional<NpnsState>(integrate(start, params, Noise{&window, eps[k]}, t_final, quiet).final_state());
  });
  ConvergenceTable table;
  for (std::size_t k = 1; k < eps.size(); ++k)
    table.rows.push_back({eps[k], norm_l2(finals[k]->velocity - finals[0]->velocity)});

  table.monotone = true;
  for (std::size_t k = 1; k < table.rows.size(); ++k)
    table.monotone = table.monotone && table.rows[k].error < table.rows[k - 1].error;
  std::vector<double> x, y;
  for (const auto& r : table.rows)
    if (r.epsilon > 0.0 && r.error > 0.0) x.push_back(std::log(r.epsilon)), y.push_back(std::log(r.error));
  if (x.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
    table.slope = sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
    table.passed = table.monotone && table.slope >= 0.7 && table.slope <= 1.3;
  } else {
    table.slope = std::numeric_limits<double>::quiet_NaN();
    table.note = "fewer than two nonzero errors; slope undefined";
  }
  return table;
}

SweepResult assemble_sweep(AttractorCloud reference, std::vector<AttractorCloud> clouds, double fraction) {
  if (clouds.empty()) throw std::invalid_argument("sweep needs at least one cloud");
  SweepResult sweep;
  sweep.fraction = fraction;
  sweep.reference = std::move(reference);
  for (auto& cloud : clouds) {
    const SemiDistanceResult d = semi_distance(cloud, sweep.reference, Metric::H);
    SweepRow row;
    row.epsilon = cloud.epsilon;
    row.distance = d.value;
    row.gauge = std::max(cloud.gauge, sweep.reference.gauge);
    row.converged = cloud.converged && sweep.reference.converged;
    row.worst = d.worst;
    row.nearest = d.nearest;
    sweep.indicative_only = sweep.indicative_only || !row.converged;
    sweep.rows.push_back(row);
    sweep.clouds.push_back(std::move(cloud));
  }
  sweep.passed = sweep.rows.size() == 1 || sweep.rows.back().distance <= fraction * sweep.rows.front().distance;
  return sweep;
}

SweepResult upper_semicontinuity_sweep(const std::vector<double>& epsilons, const WienerPath& path,
                                       const PhysicalParams& params, const CloudConfig& config, double fraction) {
  if (epsilons.empty()) throw std::invalid_argument("epsilon list must not be empty");
  AttractorCloud reference = build_cloud(0.0, path, params, config);
  std::vector<AttractorCloud> clouds;
  for (double eps : epsilons) clouds.push_back(eps == 0.0 ? reference : build_cloud(eps, path, params, config));
  return assemble_sweep(std::move(reference), std::move(clouds), fraction);
}

void write_sweep_csv(std::ostream& os, const SweepResult& sweep) {
  os << "epsilon,distance,gauge,converged,worst,nearest\n";
  for (const auto& r : sweep.rows)
    os << fmt::format("{:.17g},{:.17g},{:.17g},{},{},{}\n", r.epsilon, r.distance, r.gauge, r.converged ? 1 : 0,
                      r.worst, r.nearest);
}

void write_convergence_csv(std::ostream& os, const ConvergenceTable& table) {
  os << "epsilon,error\n";
  for (const auto& r : table.rows) os << fmt::format("{:.17g},{:.17g}\n", r.epsilon, r.error);
}

void save_cloud(const std::filesystem::path& dir, const AttractorCloud& cloud) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json j;
  j["epsilon"] = cloud.epsilon;
  j["seed"] = cloud.seed;
  j["pullback_time"] = cloud.pullback_time;
  j["t0_levels"] = cloud.t0_levels;
  j["displacement"] = cloud.displacement;
  if (std::isfinite(cloud.gauge)) j["gauge"] = cloud.gauge;
  else j["gauge"] = nullptr;
  j["converged"] = cloud.converged;
  j["grid"] = cloud.points.empty() ? 0 : cloud.points.front().grid().n();
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const std::string file = fmt::format("point_{:04d}.bin", i);
    const NpnsState& s = cloud.points[i];
    write_fields(dir / file, {s.velocity.x, s.velocity.y, s.sigma, s.rho}, Precision::complex128);
    pts.push_back({{"file", file}, {"provenance", i < cloud.provenance.size() ? cloud.provenance[i] : ""},
                   {"norm_h", norm_h(s)}});
  }
  std::ofstream os(dir / "index.json", std::ios::binary);
  os << j.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write " + (dir / "index.json").string());
}

AttractorCloud load_cloud(const std::filesystem::path& dir) {
  std::ifstream is(dir / "index.json");
  if (!is) throw std::runtime_error("missing cloud index in " + dir.string());
  const auto j = nlohmann::json::parse(is);
  AttractorCloud c;
  c.epsilon = j.at("epsilon");
  c.seed = j.at("seed");
  c.pullback_time = j.at("pullback_time");
  c.t0_levels = j.at("t0_levels").get<std::vector<double>>();
  c.displacement = j.at("displacement").get<std::vector<double>>();
  c.gauge = j.at("gauge").is_null() ? std::numeric_limits<double>::infinity() : j.at("gauge").get<double>();
  c.converged = j.at("converged");
  for (const auto& p : j.at("points")) {
    const auto f = read_fields(dir / p.at("file").get<std::string>());
    if (f.size() != 4) throw std::runtime_error("cloud point file must hold four fields");
    c.points.emplace_back(VectorField(f[0], f[1]), f[2], f[3]);
    c.provenance.push_back(p.at("provenance"));
  }
  return c;
}

}  // namespace npns
