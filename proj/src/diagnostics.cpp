#include "npns/diagnostics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace npns {

DiagnosticsRecord diagnose(const NpnsState& state, double z) {
  DiagnosticsRecord r;
  r.time = state.time;
  r.z = z;
  const double l2 = norm_l2(state.velocity), h1 = seminorm_h1(state.velocity);
  if (state.gauge == Gauge::transformed) {
    r.l2_v = l2;
    r.h1_v = h1;
    r.l2_u = l2 / z;
    r.h1_u = h1 / z;
  } else {
    r.l2_u = l2;
    r.h1_u = h1;
    r.l2_v = l2 * z;
    r.h1_v = h1 * z;
  }
  r.l2_sigma = norm_l2(state.sigma);
  r.mean_sigma = state.sigma.mean();
  r.mean_rho = state.rho.mean();
  SpectralField fluct = state.sigma;
  fluct.set_mean_free(true);
  r.l2_sigma_fluct = norm_l2(fluct);
  r.l2_rho = norm_l2(state.rho);
  r.h1_sigma = seminorm_h1(state.sigma);
  r.h1_rho = seminorm_h1(state.rho);
  r.l3_grad_rho = norm_lp(gradient(state.rho), 3);

  const PhysicalField sigma = to_physical(state.sigma), rho = to_physical(state.rho);
  r.min_sigma = sigma.min();
  r.max_sigma = sigma.max();
  r.min_c1 = r.min_c2 = INFINITY;
  for (std::size_t i = 0; i < sigma.values.size(); ++i) {
    r.min_c1 = std::min(r.min_c1, 0.5 * (sigma.values[i] + rho.values[i]));
    r.min_c2 = std::min(r.min_c2, 0.5 * (sigma.values[i] - rho.values[i]));
  }
  const PhysicalField a = to_physical(state.velocity.x), b = to_physical(state.velocity.y);
  double speed = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) speed = std::max(speed, std::hypot(a.values[i], b.values[i]));
  r.max_speed = state.gauge == Gauge::transformed ? speed / z : speed;
  return r;
}

namespace {

constexpr int kFixedColumns = 19;

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticsRecord>& records) {
  os << "time,z,l2_u,l2_v,h1_u,h1_v,l2_sigma,l2_sigma_fluct,l2_rho,h1_sigma,h1_rho,l3_grad_rho,"
        "mean_sigma,mean_rho,min_c1,min_c2,min_sigma,max_sigma,max_speed";
  std::vector<std::string> names;
  if (!records.empty())
    for (const auto& [name, value] : records.front().residuals) names.push_back(name);
  for (const auto& name : names) os << ',' << name;
  os << '\n';
  for (const auto& r : records) {
    os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},"
                      "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}",
                      r.time, r.z, r.l2_u, r.l2_v, r.h1_u, r.h1_v, r.l2_sigma, r.l2_sigma_fluct, r.l2_rho,
                      r.h1_sigma, r.h1_rho, r.l3_grad_rho, r.mean_sigma, r.mean_rho, r.min_c1, r.min_c2,
                      r.min_sigma, r.max_sigma, r.max_speed);
    for (const auto& name : names) {
      const auto it = r.residuals.find(name);
      os << ',' << (it == r.residuals.end() ? std::string() : fmt::format("{:.17g}", it->second));
    }
    os << '\n';
  }
}

std::vector<DiagnosticsRecord> read_diagnostics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("diagnostics CSV is empty");
  const auto header = split(line);
  if (header.size() < kFixedColumns || header[0] != "time" || header[18] != "max_speed")
    throw std::runtime_error("diagnostics CSV has an unexpected header");
  std::vector<DiagnosticsRecord> out;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw std::runtime_error(fmt::format("diagnostics CSV row {} has {} cells, expected {}", row, cells.size(),
                                           header.size()));
    std::vector<double> v(cells.size());
    for (std::size_t i = 0; i < kFixedColumns; ++i) {
      char* end = nullptr;
      v[i] = std::strtod(cells[i].c_str(), &end);
      if (end == cells[i].c_str()) throw std::runtime_error(fmt::format("diagnostics CSV row {}: bad number", row));
    }
    DiagnosticsRecord r;
    double* fields[kFixedColumns] = {&r.time,      &r.z,          &r.l2_u,        &r.l2_v,     &r.h1_u,
                                     &r.h1_v,      &r.l2_sigma,   &r.l2_sigma_fluct, &r.l2_rho, &r.h1_sigma,
                                     &r.h1_rho,    &r.l3_grad_rho, &r.mean_sigma, &r.mean_rho, &r.min_c1,
                                     &r.min_c2,    &r.min_sigma,  &r.max_sigma,   &r.max_speed};
    for (int i = 0; i < kFixedColumns; ++i) *fields[i] = v[static_cast<std::size_t>(i)];
    for (std::size_t i = kFixedColumns; i < cells.size(); ++i)
      if (!cells[i].empty()) r.residuals[header[i]] = std::strtod(cells[i].c_str(), nullptr);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace npns
