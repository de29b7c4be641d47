#include "npns/integrator.hpp"

#include <fmt/format.h>

#include <cmath>

namespace npns {

const char* to_string(Scheme scheme) { return scheme == Scheme::if_euler ? "if_euler" : "if_rk2"; }

Scheme parse_scheme(const std::string& name) {
  if (name == "if_euler") return Scheme::if_euler;
  if (name == "if_rk2") return Scheme::if_rk2;
  throw std::invalid_argument("unknown scheme '" + name + "' (expected if_euler or if_rk2)");
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (!(cfl_limit > 0.0 && cfl_limit <= 1.0)) throw std::invalid_argument("cfl_limit must lie in (0, 1]");
  if (!(max_z_ratio > 1.0)) throw std::invalid_argument("max_z_ratio must exceed 1");
  if (snapshot_stride < 0) throw std::invalid_argument("snapshot_stride must be >= 0");
}

double Noise::z(double t) const {
  if (path == nullptr || epsilon == 0.0) return 1.0;
  return z_of(*path, t, epsilon);
}

namespace {

// exp(-c |k|^2 tau) per mode, in coefficient storage order.
std::vector<double> decay_factors(const Grid& g, double c, double tau) {
  const int n = g.n();
  std::vector<double> f(g.size());
  for (int i1 = 0; i1 < n; ++i1) {
    const double k1 = g.wavenumber(i1);
    for (int i2 = 0; i2 < n; ++i2) {
      const double k2 = g.wavenumber(i2);
      f[static_cast<std::size_t>(i1) * n + i2] = std::exp(-c * (k1 * k1 + k2 * k2) * tau);
    }
  }
  return f;
}

struct Factors {
  std::vector<double> velocity, scalar;
  Factors(const Grid& g, const PhysicalParams& p, double tau)
      : velocity(decay_factors(g, p.nu, tau)), scalar(decay_factors(g, p.dcoef, tau)) {}
};

void scale_modes(SpectralField& f, const std::vector<double>& factor) {
  auto c = f.coeffs();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= factor[i];
}

template <typename Fields>
void apply(Fields& y, const Factors& e) {
  scale_modes(y.velocity.x, e.velocity);
  scale_modes(y.velocity.y, e.velocity);
  scale_modes(y.sigma, e.scalar);
  scale_modes(y.rho, e.scalar);
}

// y += a * d
void axpy(NpnsState& y, double a, const StateDerivative& d) {
  y.velocity += a * d.velocity;
  y.sigma += a * d.sigma;
  y.rho += a * d.rho;
}

double checked_z(const Noise& noise, double t, const IntegratorConfig& config) {
  const double z = noise.z(t);
  if (std::max(z, 1.0 / z) > config.max_z_ratio)
    throw PathExcursion(fmt::format("path excursion: z = {:.6g} at t = {} beyond max_z_ratio {:.3g}", z, t,
                                    config.max_z_ratio),
                        t);
  return z;
}

double max_speed(const VectorField& v) {
  const PhysicalField a = to_physical(v.x), b = to_physical(v.y);
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::hypot(a.values[i], b.values[i]));
  return m;
}

StateDerivative explicit_rhs(const NpnsState& y, const PhysicalParams& params, double z) {
  return rhs_terms(y, params, z).explicit_part();
}

}  // namespace

NpnsState step(const NpnsState& state, const PhysicalParams& params, const Noise& noise, double dt,
               const IntegratorConfig& config) {
  const Grid& g = state.grid();
  const bool transformed = state.gauge == Gauge::transformed;
  const double t = state.time;
  const double z0 = transformed ? checked_z(noise, t, config) : 1.0;

  const double speed = max_speed(state.velocity) / z0;
  const double h = g.spacing();
  if (dt * speed / h > config.cfl_limit) {
    const double advisory = 0.9 * config.cfl_limit * h / speed;
    throw CflViolation(fmt::format("CFL violation at t = {}: dt * max|u| / h = {:.4g} > {}; try dt <= {:.3g}", t,
                                   dt * speed / h, config.cfl_limit, advisory),
                       advisory, t);
  }

  NpnsState next = state;
  if (config.scheme == Scheme::if_euler) {
    axpy(next, dt, explicit_rhs(state, params, z0));
    apply(next, Factors(g, params, dt));
  } else {
    const Factors half(g, params, 0.5 * dt);
    NpnsState mid = state;
    axpy(mid, 0.5 * dt, explicit_rhs(state, params, z0));
    apply(mid, half);
    mid.time = t + 0.5 * dt;
    const double zm = transformed ? checked_z(noise, t + 0.5 * dt, config) : 1.0;
    StateDerivative n1 = explicit_rhs(mid, params, zm);
    apply(n1, half);
    apply(next, Factors(g, params, dt));
    axpy(next, dt, n1);
  }
  next.time = t + dt;
  return next;
}

Trajectory integrate(const NpnsState& state, const PhysicalParams& params, const Noise& noise,
                     double t_end, const IntegratorConfig& config) {
  config.validate();
  const double t0 = state.time;
  if (t_end < t0) throw std::invalid_argument("t_end must not precede the initial time");
  const bool transformed = state.gauge == Gauge::transformed;
  auto z_at = [&](double t) { return transformed ? checked_z(noise, t, config) : 1.0; };

  Trajectory traj;
  traj.snapshots.push_back(state);
  if (config.record_diagnostics) traj.diagnostics.push_back(diagnose(state, z_at(t0)));
  if (t_end == t0) return traj;

  const long steps = std::max(1L, static_cast<long>(std::ceil((t_end - t0) / config.dt - 1e-9)));
  const double dt = (t_end - t0) / static_cast<double>(steps);
  NpnsState y = state;
  for (long i = 1; i <= steps; ++i) {
    y = step(y, params, noise, dt, config);
    // Step times come from the index, not from accumulation.
    y.time = i == steps ? t_end : t0 + static_cast<double>(i) * dt;
    if (config.record_diagnostics) traj.diagnostics.push_back(diagnose(y, z_at(y.time)));
    const bool keep = i == steps || (config.snapshot_stride > 0 && i % config.snapshot_stride == 0);
    if (keep) traj.snapshots.push_back(y);
  }
  return traj;
}

NpnsState to_transformed(NpnsState physical, double z) {
  if (physical.gauge != Gauge::physical) throw std::invalid_argument("state is not in the physical gauge");
  physical.velocity *= z;
  physical.gauge = Gauge::transformed;
  return physical;
}

NpnsState to_physical_gauge(NpnsState transformed, double z) {
  if (transformed.gauge != Gauge::transformed) throw std::invalid_argument("state is not in the transformed gauge");
  transformed.velocity *= 1.0 / z;
  transformed.gauge = Gauge::physical;
  return transformed;
}

namespace {

NpnsState run_transformed(double t_start, double t_end, const Noise& noise, const NpnsState& x0,
                          const PhysicalParams& params, const IntegratorConfig& config) {
  if (x0.gauge != Gauge::physical) throw std::invalid_argument("initial datum must be in the physical gauge");
  NpnsState start = x0;
  start.time = t_start;
  start = to_transformed(std::move(start), noise.z(t_start));
  IntegratorConfig quiet = config;
  quiet.record_diagnostics = false;
  quiet.snapshot_stride = 0;
  const Trajectory traj = integrate(start, params, noise, t_end, quiet);
  return to_physical_gauge(traj.final_state(), noise.z(t_end));
}

}  // namespace

NpnsState cocycle_S(double t, const WienerPath& path, double epsilon, const NpnsState& x0,
                    const PhysicalParams& params, const IntegratorConfig& config) {
  if (t < 0.0) throw std::invalid_argument("cocycle time must be nonnegative");
  const WienerPath window = path.covering(0.0, t);
  return run_transformed(0.0, t, Noise{&window, epsilon}, x0, params, config);
}

NpnsState pullback_evaluate(double t0, const WienerPath& path, double epsilon, const NpnsState& x0,
                            const PhysicalParams& params, const IntegratorConfig& config) {
  if (!(t0 < 0.0)) throw std::invalid_argument("pullback start t0 must be negative");
  const WienerPath window = path.covering(t0, 0.0);
  return run_transformed(t0, 0.0, Noise{&window, epsilon}, x0, params, config);
}

NpnsState pullback_shifted(double t0, const WienerPath& path, double epsilon, const NpnsState& x0,
                           const PhysicalParams& params, const IntegratorConfig& config) {
  if (!(t0 < 0.0)) throw std::invalid_argument("pullback start t0 must be negative");
  NpnsState out = cocycle_S(-t0, shift_theta(path, t0), epsilon, x0, params, config);
  out.time = 0.0;
  return out;
}

NpnsState integrate_stratonovich_reference(const NpnsState& x0, const PhysicalParams& params,
                                           const WienerPath& path, double epsilon, double t_end,
                                           double dt) {
  if (x0.gauge != Gauge::physical) throw std::invalid_argument("initial datum must be in the physical gauge");
  const double t0 = x0.time;
  const long steps = std::max(1L, static_cast<long>(std::ceil((t_end - t0) / dt - 1e-9)));
  const double h = (t_end - t0) / static_cast<double>(steps);
  NpnsState y = x0;
  for (long i = 0; i < steps; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    const double t_next = i + 1 == steps ? t_end : t0 + static_cast<double>(i + 1) * h;
    const double dw = epsilon == 0.0 ? 0.0 : path(t_next) - path(t);
    const StateDerivative k1 = rhs_deterministic(y, params);
    NpnsState pred = y;
    axpy(pred, h, k1);
    pred.velocity += (epsilon * dw) * y.velocity;
    const StateDerivative k2 = rhs_deterministic(pred, params);
    NpnsState next = y;
    axpy(next, 0.5 * h, k1);
    axpy(next, 0.5 * h, k2);
    next.velocity += (0.5 * epsilon * dw) * (y.velocity + pred.velocity);
    next.time = t_next;
    y = std::move(next);
  }
  return y;
}

}  // namespace npns
