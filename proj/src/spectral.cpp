#include "npns/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace npns {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface
// is. Plans are created once per grid size and live for the process.
// FFTW_UNALIGNED keeps the codelet choice independent of buffer alignment,
// so results are bit-identical whichever thread or buffer runs them.
class FftPlans {
 public:
  static const FftPlans& get(int n) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<FftPlans>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot.reset(new FftPlans(n));
    return *slot;
  }

  void forward(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(r2c_, in, out); }
  void inverse(fftw_complex* in, double* out) const { fftw_execute_dft_c2r(c2r_, in, out); }

 private:
  explicit FftPlans(int n) {
    const std::size_t real_size = static_cast<std::size_t>(n) * n;
    const std::size_t half_size = static_cast<std::size_t>(n) * (n / 2 + 1);
    double* r = fftw_alloc_real(real_size);
    fftw_complex* c = fftw_alloc_complex(half_size);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    r2c_ = fftw_plan_dft_r2c_2d(n, n, r, c, flags);
    c2r_ = fftw_plan_dft_c2r_2d(n, n, c, r, flags);
    fftw_free(r);
    fftw_free(c);
    if (!r2c_ || !c2r_) throw std::runtime_error("FFTW planning failed");
  }

  fftw_plan r2c_ = nullptr;
  fftw_plan c2r_ = nullptr;
};

void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw std::invalid_argument("grid mismatch");
}

}  // namespace

Grid::Grid(int n) : n_(n), cutoff_((n - 1) / 3) {
  if (n < 8 || n % 2 != 0) {
    throw std::invalid_argument("grid size n must be even and >= 8 (got " + std::to_string(n) +
                                ")");
  }
}

double PhysicalField::min() const { return *std::min_element(values.begin(), values.end()); }
double PhysicalField::max() const { return *std::max_element(values.begin(), values.end()); }
double PhysicalField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

SpectralField::SpectralField(const Grid& grid) : grid_(grid), coeffs_(grid.size()) {}

SpectralField SpectralField::from_function(const Grid& grid,
                                           const std::function<double(double, double)>& f) {
  PhysicalField samples(grid);
  const double h = grid.spacing();
  for (int i = 0; i < grid.n(); ++i)
    for (int j = 0; j < grid.n(); ++j) samples(i, j) = f(i * h, j * h);
  return to_spectral(samples);
}

void SpectralField::set_mode(int k1, int k2, Complex value) {
  const int i1 = grid_.index_of(k1), i2 = grid_.index_of(k2);
  const int j1 = grid_.index_of(-k1) % grid_.n(), j2 = grid_.index_of(-k2) % grid_.n();
  if (i1 == j1 && i2 == j2) value = Complex(value.real(), 0.0);
  coeffs_[flat(i1, i2)] = value;
  coeffs_[flat(j1, j2)] = std::conj(value);
  if (i1 == 0 && i2 == 0 && value != Complex{}) mean_free_ = false;
}

void SpectralField::set_mean_free(bool flag) {
  mean_free_ = flag;
  if (flag) coeffs_[0] = Complex{};
}

SpectralField& SpectralField::operator+=(const SpectralField& other) {
  require_same_grid(grid_, other.grid_);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
  mean_free_ = mean_free_ && other.mean_free_;
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& other) {
  require_same_grid(grid_, other.grid_);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
  mean_free_ = mean_free_ && other.mean_free_;
  return *this;
}

SpectralField& SpectralField::operator*=(double s) {
  for (auto& c : coeffs_) c *= s;
  return *this;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

VectorField::VectorField(SpectralField x_, SpectralField y_) : x(std::move(x_)), y(std::move(y_)) {
  require_same_grid(x.grid(), y.grid());
}

VectorField& VectorField::operator+=(const VectorField& o) {
  x += o.x;
  y += o.y;
  return *this;
}
VectorField& VectorField::operator-=(const VectorField& o) {
  x -= o.x;
  y -= o.y;
  return *this;
}
VectorField& VectorField::operator*=(double s) {
  x *= s;
  y *= s;
  return *this;
}
VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
VectorField operator*(double s, VectorField a) { return a *= s; }

double hermitian_defect(const SpectralField& field) {
  const int n = field.grid().n();
  double defect = 0.0;
  for (int i1 = 0; i1 < n; ++i1) {
    const int j1 = (n - i1) % n;
    for (int i2 = 0; i2 < n; ++i2) {
      const int j2 = (n - i2) % n;
      defect = std::max(defect, std::abs(field.at(j1, j2) - std::conj(field.at(i1, i2))));
    }
  }
  return defect;
}

PhysicalField to_physical(const SpectralField& field) {
  const Grid& g = field.grid();
  const int n = g.n();
  double scale = 0.0;
  for (const auto& c : field.coeffs()) scale = std::max(scale, std::abs(c));
  if (hermitian_defect(field) > 1e-12 * std::max(scale, 1e-300)) {
    throw std::invalid_argument("coefficients violate Hermitian symmetry");
  }
  const int half = n / 2 + 1;
  std::vector<Complex> buffer(static_cast<std::size_t>(n) * half);
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < half; ++i2) buffer[static_cast<std::size_t>(i1) * half + i2] = field.at(i1, i2);
  PhysicalField out(g);
  FftPlans::get(n).inverse(reinterpret_cast<fftw_complex*>(buffer.data()), out.values.data());
  return out;
}

SpectralField to_spectral(const PhysicalField& field) {
  const Grid& g = field.grid;
  const int n = g.n();
  const int half = n / 2 + 1;
  std::vector<double> input = field.values;
  std::vector<Complex> buffer(static_cast<std::size_t>(n) * half);
  FftPlans::get(n).forward(input.data(), reinterpret_cast<fftw_complex*>(buffer.data()));
  SpectralField out(g);
  const double norm = 1.0 / static_cast<double>(g.size());
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < half; ++i2) out.at(i1, i2) = buffer[static_cast<std::size_t>(i1) * half + i2] * norm;
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = half; i2 < n; ++i2) out.at(i1, i2) = std::conj(out.at((n - i1) % n, n - i2));
  return out;
}

void dealias(SpectralField& field) {
  const Grid& g = field.grid();
  const int n = g.n();
  for (int i1 = 0; i1 < n; ++i1) {
    const bool row_out = std::abs(g.wavenumber(i1)) > g.cutoff();
    for (int i2 = 0; i2 < n; ++i2)
      if (row_out || std::abs(g.wavenumber(i2)) > g.cutoff()) field.at(i1, i2) = Complex{};
  }
}

void dealias(VectorField& field) {
  dealias(field.x);
  dealias(field.y);
}

SpectralField product(const PhysicalField& a, const PhysicalField& b) {
  require_same_grid(a.grid, b.grid);
  PhysicalField ab(a.grid);
  for (std::size_t i = 0; i < ab.values.size(); ++i) ab.values[i] = a.values[i] * b.values[i];
  SpectralField out = to_spectral(ab);
  dealias(out);
  return out;
}

SpectralField partial(const SpectralField& field, int direction) {
  const Grid& g = field.grid();
  const int n = g.n();
  SpectralField out(g);
  for (int i1 = 0; i1 < n; ++i1) {
    for (int i2 = 0; i2 < n; ++i2) {
      if (g.is_nyquist(i1) || g.is_nyquist(i2)) continue;
      const int k = direction == 0 ? g.wavenumber(i1) : g.wavenumber(i2);
      out.at(i1, i2) = Complex(0.0, k) * field.at(i1, i2);
    }
  }
  out.set_mean_free(true);
  return out;
}

VectorField gradient(const SpectralField& field) {
  return VectorField(partial(field, 0), partial(field, 1));
}

SpectralField laplacian(const SpectralField& field) {
  const Grid& g = field.grid();
  const int n = g.n();
  SpectralField out(g);
  for (int i1 = 0; i1 < n; ++i1) {
    for (int i2 = 0; i2 < n; ++i2) {
      if (g.is_nyquist(i1) || g.is_nyquist(i2)) continue;
      const double k1 = g.wavenumber(i1), k2 = g.wavenumber(i2);
      out.at(i1, i2) = -(k1 * k1 + k2 * k2) * field.at(i1, i2);
    }
  }
  out.set_mean_free(true);
  return out;
}

VectorField laplacian(const VectorField& field) {
  return VectorField(laplacian(field.x), laplacian(field.y));
}

SpectralField divergence(const VectorField& field) {
  SpectralField out = partial(field.x, 0);
  out += partial(field.y, 1);
  out.set_mean_free(true);
  return out;
}

VectorField leray_project(const VectorField& field) {
  const Grid& g = field.grid();
  const int n = g.n();
  VectorField out(g);
  out.x.at(0, 0) = field.x.at(0, 0);
  out.y.at(0, 0) = field.y.at(0, 0);
  for (int i1 = 0; i1 < n; ++i1) {
    for (int i2 = 0; i2 < n; ++i2) {
      if ((i1 == 0 && i2 == 0) || g.is_nyquist(i1) || g.is_nyquist(i2)) continue;
      const double k1 = g.wavenumber(i1), k2 = g.wavenumber(i2);
      const double inv_k2 = 1.0 / (k1 * k1 + k2 * k2);
      const Complex a = field.x.at(i1, i2), b = field.y.at(i1, i2);
      const Complex kdotv = k1 * a + k2 * b;
      out.x.at(i1, i2) = a - k1 * kdotv * inv_k2;
      out.y.at(i1, i2) = b - k2 * kdotv * inv_k2;
    }
  }
  out.x.set_mean_free(field.x.mean_free());
  out.y.set_mean_free(field.y.mean_free());
  return out;
}

SpectralField solve_poisson(const SpectralField& rho, double eps0) {
  if (!(eps0 > 0.0)) throw std::invalid_argument("eps0 must be positive");
  if (std::abs(rho.coeff(0, 0)) > 1e-10) throw std::invalid_argument("charge not neutral");
  const Grid& g = rho.grid();
  const int n = g.n();
  SpectralField phi(g);
  for (int i1 = 0; i1 < n; ++i1) {
    for (int i2 = 0; i2 < n; ++i2) {
      if ((i1 == 0 && i2 == 0) || g.is_nyquist(i1) || g.is_nyquist(i2)) continue;
      const double k1 = g.wavenumber(i1), k2 = g.wavenumber(i2);
      phi.at(i1, i2) = rho.at(i1, i2) / (eps0 * (k1 * k1 + k2 * k2));
    }
  }
  phi.set_mean_free(true);
  return phi;
}

double inner(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a.grid(), b.grid());
  double sum = 0.0;
  const auto ca = a.coeffs(), cb = b.coeffs();
  for (std::size_t i = 0; i < ca.size(); ++i) sum += (ca[i] * std::conj(cb[i])).real();
  return kTwoPi * kTwoPi * sum;
}

double inner(const VectorField& a, const VectorField& b) { return inner(a.x, b.x) + inner(a.y, b.y); }

double norm_l2(const SpectralField& field) {
  double sum = 0.0;
  for (const auto& c : field.coeffs()) sum += std::norm(c);
  return kTwoPi * std::sqrt(sum);
}

double norm_l2(const VectorField& field) {
  return std::hypot(norm_l2(field.x), norm_l2(field.y));
}

double seminorm_h1(const SpectralField& field) {
  const Grid& g = field.grid();
  const int n = g.n();
  double sum = 0.0;
  for (int i1 = 0; i1 < n; ++i1) {
    for (int i2 = 0; i2 < n; ++i2) {
      if (g.is_nyquist(i1) || g.is_nyquist(i2)) continue;
      const double k1 = g.wavenumber(i1), k2 = g.wavenumber(i2);
      sum += (k1 * k1 + k2 * k2) * std::norm(field.at(i1, i2));
    }
  }
  return kTwoPi * std::sqrt(sum);
}

double seminorm_h1(const VectorField& field) {
  return std::hypot(seminorm_h1(field.x), seminorm_h1(field.y));
}

namespace {
double lp_from_samples(const std::vector<double>& magnitude, const Grid& g, int p) {
  if (p != 3 && p != 4) throw std::invalid_argument("norm_lp supports p = 3 or 4");
  double sum = 0.0;
  for (double m : magnitude) sum += std::pow(std::abs(m), p);
  const double h = g.spacing();
  return std::pow(sum * h * h, 1.0 / p);
}
}  // namespace

double norm_lp(const SpectralField& field, int p) {
  return lp_from_samples(to_physical(field).values, field.grid(), p);
}

double norm_lp(const VectorField& field, int p) {
  const PhysicalField a = to_physical(field.x), b = to_physical(field.y);
  std::vector<double> mag(a.values.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::hypot(a.values[i], b.values[i]);
  return lp_from_samples(mag, field.grid(), p);
}

double max_divergence_coeff(const VectorField& field) {
  const Grid& g = field.grid();
  const int n = g.n();
  double m = 0.0;
  for (int i1 = 0; i1 < n; ++i1) {
    for (int i2 = 0; i2 < n; ++i2) {
      if (g.is_nyquist(i1) || g.is_nyquist(i2)) continue;
      const double k1 = g.wavenumber(i1), k2 = g.wavenumber(i2);
      m = std::max(m, std::abs(k1 * field.x.at(i1, i2) + k2 * field.y.at(i1, i2)));
    }
  }
  return m;
}

}  // namespace npns
