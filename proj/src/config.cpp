#include "npns/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <toml.hpp>

namespace npns {

const char* to_string(Kind kind) {
  switch (kind) {
    case Kind::simulate: return "simulate";
    case Kind::verify: return "verify";
    case Kind::pullback: return "pullback";
    case Kind::sweep: return "sweep";
    case Kind::convergence: return "convergence";
  }
  return "unknown";
}

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += "\n  - " + s;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> p)
    : std::runtime_error("invalid configuration:" + join(p)), problems(std::move(p)) {}

namespace {

// Reads typed keys from one table and records every problem.
class Section {
 public:
  Section(const toml::table& root, std::string name, std::vector<std::string>& problems)
      : name_(std::move(name)), problems_(problems) {
    if (name_.empty()) {
      table_ = &root;
    } else if (const auto* node = root.get(name_)) {
      table_ = node->as_table();
      if (table_ == nullptr) problems_.push_back(fmt::format("[{}] must be a table", name_));
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    known_.insert(key);
    if (table_ == nullptr) return;
    const toml::node* node = table_->get(key);
    if (node == nullptr) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node->value_exact<bool>()) out = *v;
      else wrong_type(key, "a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node->value_exact<std::string>()) out = *v;
      else wrong_type(key, "a string");
    } else if constexpr (std::is_same_v<T, double>) {
      if (auto v = node->value_exact<double>()) out = *v;
      else if (auto i = node->value_exact<std::int64_t>()) out = static_cast<double>(*i);
      else wrong_type(key, "a number");
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      const auto* arr = node->as_array();
      if (arr == nullptr) return wrong_type(key, "an array of numbers");
      std::vector<double> values;
      for (const auto& e : *arr) {
        if (auto v = e.value_exact<double>()) values.push_back(*v);
        else if (auto i = e.value_exact<std::int64_t>()) values.push_back(static_cast<double>(*i));
        else return wrong_type(key, "an array of numbers");
      }
      out = std::move(values);
    } else {
      // integers
      if (auto v = node->value_exact<std::int64_t>()) {
        if (std::is_unsigned_v<T> && *v < 0) return wrong_type(key, "a nonnegative integer");
        out = static_cast<T>(*v);
      } else {
        wrong_type(key, "an integer");
      }
    }
  }

  void mark_known(const std::string& key) { known_.insert(key); }
  const toml::table* table() const { return table_; }

  void reject_unknown() {
    if (table_ == nullptr) return;
    for (const auto& [k, v] : *table_) {
      const std::string key(k.str());
      if (!known_.count(key)) problems_.push_back(fmt::format("unknown key '{}'", where(key)));
    }
  }

 private:
  std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }
  void wrong_type(const std::string& key, const char* what) {
    problems_.push_back(fmt::format("'{}' must be {}", where(key), what));
  }

  std::string name_;
  const toml::table* table_ = nullptr;
  std::set<std::string> known_;
  std::vector<std::string>& problems_;
};

bool negative_decreasing(const std::vector<double>& v) {
  if (v.empty()) return false;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!(v[i] < 0.0) || (i > 0 && !(v[i] < v[i - 1]))) return false;
  return true;
}

bool positive(double x) { return x > 0.0 && std::isfinite(x); }

void validate(const RunConfig& c, std::vector<std::string>& p) {
  const bool grid_ok = c.n >= 4 && c.n <= 1024 && c.n % 2 == 0;
  if (!grid_ok) p.push_back(fmt::format("grid.n = {} must be even and in [4, 1024]", c.n));
  if (!positive(c.nu)) p.push_back("physical.nu must be positive");
  if (!positive(c.dcoef)) p.push_back("physical.D must be positive");
  if (!positive(c.eps0)) p.push_back("physical.eps0 must be positive");
  if (c.force != "shear" && c.force != "none" && c.force != "modes")
    p.push_back(fmt::format("physical.force = '{}' must be shear, none or modes", c.force));
  if (c.force == "modes" && c.force_modes.empty()) p.push_back("physical.force = 'modes' needs physical.force_modes");
  if (!std::isfinite(c.force_amplitude)) p.push_back("physical.force_amplitude must be finite");
  if (!(c.epsilon >= 0.0) || !std::isfinite(c.epsilon)) p.push_back("noise.epsilon must be >= 0");
  if (!positive(c.dt_w)) p.push_back("noise.dt_w must be positive");
  try {
    c.integrator.validate();
  } catch (const std::exception& e) {
    p.push_back(std::string("integrator: ") + e.what());
  }
  if (!positive(c.t_end)) p.push_back("integrator.t_end must be positive");
  try {
    c.ensemble.validate();
  } catch (const std::exception& e) {
    p.push_back(std::string("initial: ") + e.what());
  }
  if (c.initial_index < 0 || c.initial_index >= c.ensemble.count)
    p.push_back("initial.index must lie in [0, initial.count)");

  const auto& v = c.verify;
  if (v.runs < 1 || v.runs > c.ensemble.count) p.push_back("verify.runs must lie in [1, initial.count]");
  if (!(v.delta >= 0.0)) p.push_back("verify.delta must be >= 0");
  if (!positive(v.window)) p.push_back("verify.window must be positive");
  if (!(v.coupling_constant >= 0.0)) p.push_back("verify.coupling_constant must be >= 0");
  if (!(v.t_truncate <= 0.0)) p.push_back("verify.t_truncate must be <= 0 (0 selects the default)");
  if (v.t_truncate < 0.0 && positive(c.nu) && v.t_truncate > -std::log(1e12) / c.nu)
    p.push_back(fmt::format("verify.t_truncate must be <= -ln(1e12)/nu = {:.6g}", -std::log(1e12) / c.nu));
  if (!(v.r0 >= 0.0)) p.push_back("verify.r0 must be >= 0 (0 selects the default)");
  if (!(v.gradient_bound >= 0.0)) p.push_back("verify.gradient_bound must be >= 0");
  if (!negative_decreasing(v.absorption_levels))
    p.push_back("verify.absorption_levels must be negative and decreasing");
  if (!(v.ball_factor >= 1.0)) p.push_back("verify.ball_factor must be >= 1");
  if (v.absorption_samples < 1) p.push_back("verify.absorption_samples must be >= 1");
  if (v.absorption && v.absorption_samples > c.ensemble.count)
    p.push_back("verify.absorption_samples must not exceed initial.count");
  if (!v.trajectory.empty() && v.runs != 1) p.push_back("verify.trajectory replays one run; set verify.runs = 1");

  if (!negative_decreasing(c.pullback_levels)) p.push_back("pullback.t0_levels must be negative and decreasing");
  if (c.sweep_epsilons.empty()) p.push_back("sweep.epsilons must not be empty");
  for (double e : c.sweep_epsilons)
    if (!(e >= 0.0)) p.push_back("sweep.epsilons must be >= 0");
  if (!(c.sweep_fraction > 0.0 && c.sweep_fraction <= 1.0)) p.push_back("sweep.fraction must lie in (0, 1]");
  if (c.convergence_epsilons.empty()) p.push_back("convergence.epsilons must not be empty");
  for (double e : c.convergence_epsilons)
    if (!(e >= 0.0)) p.push_back("convergence.epsilons must be >= 0");
  if (!positive(c.convergence_t_final)) p.push_back("convergence.t_final must be positive");

  if (!grid_ok || !p.empty()) return;
  const Grid g = c.grid();
  for (const auto& m : c.force_modes)
    if (!g.in_band(m.k1, m.k2))
      p.push_back(fmt::format("physical.force_modes: mode ({}, {}) lies outside the dealiased band |k| <= {}", m.k1,
                              m.k2, g.cutoff()));
  if (!p.empty()) return;
  try {
    c.physical_params().validate();
  } catch (const std::exception& e) {
    p.push_back(std::string("physical.force: ") + e.what());
  }
  // CFL plausibility on the initial data and the forcing scale.
  const NpnsState x0 = ensemble_member(g, c.ensemble, c.initial_index);
  const PhysicalField ux = to_physical(x0.velocity.x), uy = to_physical(x0.velocity.y);
  double speed = 0.0;
  for (std::size_t i = 0; i < ux.values.size(); ++i) speed = std::max(speed, std::hypot(ux.values[i], uy.values[i]));
  const double dt = c.integrator.dt;
  if (dt * speed / g.spacing() > c.integrator.cfl_limit)
    p.push_back(fmt::format("integrator.dt = {} is not CFL-plausible: dt max|u0| / h = {:.3g} > cfl_limit {}", dt,
                            dt * speed / g.spacing(), c.integrator.cfl_limit));
}

}  // namespace

PhysicalParams RunConfig::physical_params() const {
  const Grid g = grid();
  VectorField f(g);
  if (force == "shear") {
    f = shear_force(g, force_amplitude);
  } else if (force == "modes") {
    for (const auto& m : force_modes) {
      SpectralField& comp = m.component == 0 ? f.x : f.y;
      comp.set_mode(m.k1, m.k2, Complex(m.re, m.im));
    }
    f.x.set_mean_free(true);
    f.y.set_mean_free(true);
  } else {
    f.x.set_mean_free(true);
    f.y.set_mean_free(true);
  }
  PhysicalParams p(g);
  p.nu = nu;
  p.dcoef = dcoef;
  p.eps0 = eps0;
  p.force = f;
  return p;
}

WienerPath RunConfig::noise_path() const {
  double lo = -1.0;
  for (double t : pullback_levels) lo = std::min(lo, t);
  for (double t : verify.absorption_levels) lo = std::min(lo, t);
  const double hi = std::max({1.0, t_end, convergence_t_final});
  return WienerPath::sample(noise_seed, lo, hi, dt_w);
}

std::string RunConfig::canonical_json() const {
  nlohmann::ordered_json j;
  j["kind"] = to_string(kind);
  j["grid"] = {{"n", n}};
  nlohmann::ordered_json modes = nlohmann::ordered_json::array();
  for (const auto& m : force_modes)
    modes.push_back({{"component", m.component == 0 ? "x" : "y"}, {"k1", m.k1}, {"k2", m.k2}, {"re", m.re},
                     {"im", m.im}});
  j["physical"] = {{"nu", nu}, {"D", dcoef}, {"eps0", eps0}, {"force", force},
                   {"force_amplitude", force_amplitude}, {"force_modes", modes}};
  j["noise"] = {{"epsilon", epsilon}, {"seed", noise_seed}, {"dt_w", dt_w}};
  j["integrator"] = {{"dt", integrator.dt},
                     {"scheme", to_string(integrator.scheme)},
                     {"t_end", t_end},
                     {"cfl_limit", integrator.cfl_limit},
                     {"max_z_ratio", integrator.max_z_ratio},
                     {"snapshot_stride", integrator.snapshot_stride}};
  j["initial"] = {{"count", ensemble.count},
                  {"seed", ensemble.seed},
                  {"kmax", ensemble.kmax},
                  {"sigma_mean", ensemble.sigma_mean},
                  {"sigma_amplitude", ensemble.sigma_amplitude},
                  {"rho_amplitude", ensemble.rho_amplitude},
                  {"velocity_norm", ensemble.velocity_norm},
                  {"index", initial_index}};
  j["verify"] = {{"runs", verify.runs},
                 {"calibrate", verify.calibrate},
                 {"delta", verify.delta},
                 {"window", verify.window},
                 {"coupling_constant", verify.coupling_constant},
                 {"radii", verify.radii},
                 {"t_truncate", verify.t_truncate},
                 {"r0", verify.r0},
                 {"gradient_bound", verify.gradient_bound},
                 {"absorption", verify.absorption},
                 {"absorption_levels", verify.absorption_levels},
                 {"ball_factor", verify.ball_factor},
                 {"absorption_samples", verify.absorption_samples},
                 {"trajectory", verify.trajectory}};
  j["pullback"] = {{"t0_levels", pullback_levels}};
  j["sweep"] = {{"epsilons", sweep_epsilons}, {"fraction", sweep_fraction}};
  j["convergence"] = {{"epsilons", convergence_epsilons}, {"t_final", convergence_t_final}};
  return j.dump();
}

RunConfig parse_config(const std::string& text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << e.description() << " at line " << e.source().begin.line;
    throw ConfigError({"TOML syntax: " + os.str()});
  }
  std::vector<std::string> p;
  RunConfig c;

  Section top(root, "", p);
  std::string kind = "simulate";
  top.read("kind", kind);
  top.read("output", c.output);
  if (kind == "simulate") c.kind = Kind::simulate;
  else if (kind == "verify") c.kind = Kind::verify;
  else if (kind == "pullback") c.kind = Kind::pullback;
  else if (kind == "sweep") c.kind = Kind::sweep;
  else if (kind == "convergence") c.kind = Kind::convergence;
  else p.push_back(fmt::format("kind = '{}' must be simulate, verify, pullback, sweep or convergence", kind));
  for (const char* t : {"grid", "physical", "noise", "integrator", "initial", "verify", "pullback", "sweep",
                        "convergence"})
    top.mark_known(t);
  top.reject_unknown();

  Section grid(root, "grid", p);
  grid.read("n", c.n);
  grid.reject_unknown();

  Section phys(root, "physical", p);
  phys.read("nu", c.nu);
  phys.read("D", c.dcoef);
  phys.read("eps0", c.eps0);
  phys.read("force", c.force);
  phys.read("force_amplitude", c.force_amplitude);
  phys.mark_known("force_modes");
  if (phys.table() != nullptr) {
    if (const auto* node = phys.table()->get("force_modes")) {
      const auto* arr = node->as_array();
      if (arr == nullptr) p.push_back("physical.force_modes must be an array of tables");
      else
        for (const auto& e : *arr) {
          const auto* t = e.as_table();
          if (t == nullptr) {
            p.push_back("physical.force_modes entries must be tables");
            continue;
          }
          ForceMode m;
          const std::string comp = t->get("component") ? t->get("component")->value_or(std::string("?")) : "x";
          if (comp != "x" && comp != "y") p.push_back("physical.force_modes.component must be 'x' or 'y'");
          m.component = comp == "y" ? 1 : 0;
          m.k1 = static_cast<int>(t->get("k1") ? t->get("k1")->value_or<std::int64_t>(0) : 0);
          m.k2 = static_cast<int>(t->get("k2") ? t->get("k2")->value_or<std::int64_t>(0) : 0);
          m.re = t->get("re") ? t->get("re")->value_or(0.0) : 0.0;
          m.im = t->get("im") ? t->get("im")->value_or(0.0) : 0.0;
          for (const auto& [k, v] : *t) {
            const std::string key(k.str());
            if (key != "component" && key != "k1" && key != "k2" && key != "re" && key != "im")
              p.push_back(fmt::format("unknown key 'physical.force_modes.{}'", key));
          }
          c.force_modes.push_back(m);
        }
    }
  }
  phys.reject_unknown();

  Section noise(root, "noise", p);
  noise.read("epsilon", c.epsilon);
  noise.read("seed", c.noise_seed);
  noise.read("dt_w", c.dt_w);
  noise.reject_unknown();

  Section integ(root, "integrator", p);
  integ.read("dt", c.integrator.dt);
  std::string scheme = to_string(c.integrator.scheme);
  integ.read("scheme", scheme);
  try {
    c.integrator.scheme = parse_scheme(scheme);
  } catch (const std::exception& e) {
    p.push_back(std::string("integrator.scheme: ") + e.what());
  }
  integ.read("t_end", c.t_end);
  integ.read("cfl_limit", c.integrator.cfl_limit);
  integ.read("max_z_ratio", c.integrator.max_z_ratio);
  integ.read("snapshot_stride", c.integrator.snapshot_stride);
  integ.reject_unknown();

  Section init(root, "initial", p);
  init.read("count", c.ensemble.count);
  init.read("seed", c.ensemble.seed);
  init.read("kmax", c.ensemble.kmax);
  init.read("sigma_mean", c.ensemble.sigma_mean);
  init.read("sigma_amplitude", c.ensemble.sigma_amplitude);
  init.read("rho_amplitude", c.ensemble.rho_amplitude);
  init.read("velocity_norm", c.ensemble.velocity_norm);
  init.read("index", c.initial_index);
  init.reject_unknown();

  Section ver(root, "verify", p);
  ver.read("runs", c.verify.runs);
  ver.read("calibrate", c.verify.calibrate);
  ver.read("delta", c.verify.delta);
  ver.read("window", c.verify.window);
  ver.read("coupling_constant", c.verify.coupling_constant);
  ver.read("radii", c.verify.radii);
  ver.read("t_truncate", c.verify.t_truncate);
  ver.read("r0", c.verify.r0);
  ver.read("gradient_bound", c.verify.gradient_bound);
  ver.read("absorption", c.verify.absorption);
  ver.read("absorption_levels", c.verify.absorption_levels);
  ver.read("ball_factor", c.verify.ball_factor);
  ver.read("absorption_samples", c.verify.absorption_samples);
  ver.read("trajectory", c.verify.trajectory);
  ver.reject_unknown();

  Section pull(root, "pullback", p);
  pull.read("t0_levels", c.pullback_levels);
  pull.reject_unknown();

  Section sweep(root, "sweep", p);
  sweep.read("epsilons", c.sweep_epsilons);
  sweep.read("fraction", c.sweep_fraction);
  sweep.reject_unknown();

  Section conv(root, "convergence", p);
  conv.read("epsilons", c.convergence_epsilons);
  conv.read("t_final", c.convergence_t_final);
  conv.reject_unknown();

  validate(c, p);
  if (!p.empty()) throw ConfigError(std::move(p));
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError({"cannot read config file " + path.string()});
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace npns
