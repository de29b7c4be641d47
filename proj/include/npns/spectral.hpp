#pragma once

// Fourier representation of real periodic fields on the square torus
// [0, 2pi]^2, with exact spectral differential operators.

#include <complex>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <span>
#include <vector>

namespace npns {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Square collocation grid with n points per direction on [0, 2pi).
///
/// Wavevector components are stored in FFT order: index i maps to
/// k = i for i < n/2 and k = i - n otherwise, so k ranges over [-n/2, n/2).
/// The Nyquist line k = -n/2 has no real-valued derivative and is dropped
/// by every differential operator.
class Grid {
 public:
  explicit Grid(int n);

  int n() const noexcept { return n_; }
  /// Largest retained |k_j| after a quadratic product.
  int cutoff() const noexcept { return cutoff_; }
  double length() const noexcept { return kTwoPi; }
  double spacing() const noexcept { return kTwoPi / n_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(n_) * n_; }

  int wavenumber(int index) const noexcept { return index < n_ / 2 ? index : index - n_; }
  int index_of(int k) const noexcept { return k >= 0 ? k : k + n_; }
  bool is_nyquist(int index) const noexcept { return index == n_ / 2; }
  bool in_band(int k1, int k2) const noexcept {
    return std::abs(k1) <= cutoff_ && std::abs(k2) <= cutoff_;
  }

  bool operator==(const Grid&) const = default;

 private:
  int n_;
  int cutoff_;
};

/// Real-space samples f(x_i, y_j) at x_i = 2 pi i / n, stored at i * n + j.
struct PhysicalField {
  Grid grid;
  std::vector<double> values;

  explicit PhysicalField(const Grid& g) : grid(g), values(g.size(), 0.0) {}
  double& operator()(int i, int j) { return values[static_cast<std::size_t>(i) * grid.n() + j]; }
  double operator()(int i, int j) const {
    return values[static_cast<std::size_t>(i) * grid.n() + j];
  }
  double min() const;
  double max() const;
  double max_abs() const;
};

/// One real scalar field as truncated Fourier coefficients,
/// f(x) = sum_k c_k exp(i k.x), stored row-major over (k1, k2) in FFT order.
class SpectralField {
 public:
  explicit SpectralField(const Grid& grid);

  /// Samples f on the collocation grid and transforms.
  static SpectralField from_function(const Grid& grid,
                                     const std::function<double(double, double)>& f);

  const Grid& grid() const noexcept { return grid_; }

  Complex coeff(int k1, int k2) const {
    return coeffs_[flat(grid_.index_of(k1), grid_.index_of(k2))];
  }
  /// Sets c_k and its Hermitian partner c_{-k} = conj(c_k).
  void set_mode(int k1, int k2, Complex value);

  Complex& at(int i1, int i2) { return coeffs_[flat(i1, i2)]; }
  Complex at(int i1, int i2) const { return coeffs_[flat(i1, i2)]; }

  std::span<Complex> coeffs() noexcept { return coeffs_; }
  std::span<const Complex> coeffs() const noexcept { return coeffs_; }

  bool mean_free() const noexcept { return mean_free_; }
  /// Marking a field mean-free zeroes its (0,0) coefficient exactly.
  void set_mean_free(bool flag);
  double mean() const noexcept { return coeffs_[0].real(); }

  SpectralField& operator+=(const SpectralField& other);
  SpectralField& operator-=(const SpectralField& other);
  SpectralField& operator*=(double s);

  bool operator==(const SpectralField& other) const {
    return grid_ == other.grid_ && coeffs_ == other.coeffs_;
  }

 private:
  std::size_t flat(int i1, int i2) const noexcept {
    return static_cast<std::size_t>(i1) * grid_.n() + i2;
  }

  Grid grid_;
  std::vector<Complex> coeffs_;
  bool mean_free_ = false;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

/// Two scalar components on one grid.
struct VectorField {
  SpectralField x;
  SpectralField y;

  explicit VectorField(const Grid& grid) : x(grid), y(grid) {}
  VectorField(SpectralField x_, SpectralField y_);

  const Grid& grid() const noexcept { return x.grid(); }

  VectorField& operator+=(const VectorField& o);
  VectorField& operator-=(const VectorField& o);
  VectorField& operator*=(double s);
  bool operator==(const VectorField& o) const { return x == o.x && y == o.y; }
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);
VectorField operator*(double s, VectorField a);

// Transforms. to_physical rejects coefficient arrays that are not
// Hermitian-symmetric (the field would not be real).
PhysicalField to_physical(const SpectralField& field);
SpectralField to_spectral(const PhysicalField& field);

/// Max |c_{-k} - conj(c_k)| over all modes.
double hermitian_defect(const SpectralField& field);

/// Zeroes every mode with |k1| or |k2| above the grid cutoff.
void dealias(SpectralField& field);
void dealias(VectorField& field);

/// Dealiased pseudo-spectral product of two fields given in real space.
SpectralField product(const PhysicalField& a, const PhysicalField& b);

VectorField gradient(const SpectralField& field);
SpectralField partial(const SpectralField& field, int direction);
SpectralField laplacian(const SpectralField& field);
SpectralField divergence(const VectorField& field);
VectorField laplacian(const VectorField& field);

/// Orthogonal projection onto divergence-free fields:
/// P v = v - k (k.v) / |k|^2 for k != 0; the mean is left unchanged.
VectorField leray_project(const VectorField& field);

/// Solves -eps0 Lap(phi) = rho with zero-mean phi. Throws
/// std::invalid_argument("charge not neutral") if |mean(rho)| > 1e-10.
SpectralField solve_poisson(const SpectralField& rho, double eps0);

/// L^2 inner product over the torus, via Parseval.
double inner(const SpectralField& a, const SpectralField& b);
double inner(const VectorField& a, const VectorField& b);

double norm_l2(const SpectralField& field);
double norm_l2(const VectorField& field);
/// ||grad f||_{L^2}.
double seminorm_h1(const SpectralField& field);
double seminorm_h1(const VectorField& field);
/// L^p norm (p = 3 or 4) by collocation quadrature, no oversampling.
double norm_lp(const SpectralField& field, int p);
/// L^p norm of the pointwise Euclidean magnitude of a vector field.
double norm_lp(const VectorField& field, int p);

/// Largest |k.c_k| over modes (divergence in coefficient space).
double max_divergence_coeff(const VectorField& field);

}  // namespace npns
