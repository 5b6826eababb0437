#pragma once

// Domain types shared by every module: unit system, grids, wave fields,
// particle configurations and trajectories.
//
// All computation runs in scaled units where hbar = 1 and the reference
// mass = 1. Lengths are in units of UnitSystem::length_unit (1 nm by
// default), times in UnitSystem::time_unit().

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pilotwave/error.hpp"

namespace pilotwave {

using cplx = std::complex<double>;

namespace constants {
// CODATA 2018.
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double electron_mass = 9.1093837015e-31;  // kg
}  // namespace constants

enum class Dimension { Length, Time, Velocity, Momentum, Mass };

std::string_view to_string(Dimension d);

/// Parses "length", "time", "velocity", "momentum" or "mass".
/// Throws Error(UnknownDimension) otherwise.
Dimension parse_dimension(std::string_view tag);

struct UnitSystem {
  double length_unit = 1e-9;                    // m per scaled length
  double mass = constants::electron_mass;       // kg per scaled mass
  double hbar = constants::hbar;                // J s

  double time_unit() const { return mass * length_unit * length_unit / hbar; }
  double velocity_unit() const { return length_unit / time_unit(); }
  double momentum_unit() const { return hbar / length_unit; }

  double unit_of(Dimension d) const;
};

double convert_si_to_scaled(const UnitSystem& u, double si_value, Dimension d);
double convert_si_to_scaled(const UnitSystem& u, double si_value, std::string_view dimension_tag);
double convert_scaled_to_si(const UnitSystem& u, double scaled_value, Dimension d);

/// Uniform 1D mesh. Point i sits at x_min + i*dx; dx = (x_max - x_min)/(n - 1).
class Grid1D {
 public:
  Grid1D(std::size_t n, double x_min, double x_max);

  std::size_t n() const { return n_; }
  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double dx() const { return dx_; }
  double coord(std::size_t i) const { return x_min_ + static_cast<double>(i) * dx_; }
  bool is_power_of_two() const { return (n_ & (n_ - 1)) == 0; }
  bool contains_strictly(double x) const { return x > x_min_ && x < x_max_; }
  /// Index of the grid point whose cell [x_i - dx/2, x_i + dx/2) holds x, clamped.
  std::size_t nearest(double x) const;
  /// Spectral wave numbers in FFT order (periodic length n*dx).
  std::vector<double> wave_numbers() const;

  void require_spectral() const;

  friend bool operator==(const Grid1D&, const Grid1D&) = default;

 private:
  std::size_t n_;
  double x_min_;
  double x_max_;
  double dx_;
};

/// System axis x and pointer axis y.
struct Grid2D {
  Grid1D x;
  Grid1D y;
  friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

/// Complex field on a 1D or 2D grid. Storage is x-major: index = ix * ny + iy,
/// with ny = 1 for 1D fields.
class WaveField {
 public:
  WaveField(Grid1D x, std::vector<cplx> values, double t = 0.0);
  WaveField(Grid2D g, std::vector<cplx> values, double t = 0.0);

  int dims() const { return y_ ? 2 : 1; }
  const Grid1D& x_axis() const { return x_; }
  const Grid1D& y_axis() const;
  Grid2D grid2d() const { return Grid2D{x_, y_axis()}; }
  bool same_grid(const WaveField& other) const { return x_ == other.x_ && y_ == other.y_; }

  std::size_t nx() const { return x_.n(); }
  std::size_t ny() const { return y_ ? y_->n() : 1; }
  std::size_t size() const { return values_.size(); }
  double cell_volume() const { return x_.dx() * (y_ ? y_->dx() : 1.0); }

  double t() const { return t_; }
  void set_t(double t) { t_ = t; }

  cplx& operator()(std::size_t ix, std::size_t iy = 0) { return values_[ix * ny() + iy]; }
  const cplx& operator()(std::size_t ix, std::size_t iy = 0) const { return values_[ix * ny() + iy]; }
  std::span<cplx> values() { return values_; }
  std::span<const cplx> values() const { return values_; }

  /// Riemann sum of |value|^2 times the cell volume.
  double norm_squared() const;
  double norm() const;
  /// Largest |value|^2 on the grid.
  double max_density() const;
  bool all_finite() const;

 private:
  Grid1D x_;
  std::optional<Grid1D> y_;
  std::vector<cplx> values_;
  double t_;
};

/// Rescales to unit norm. Throws Error(ZeroNorm) if the norm is below 1e-300.
WaveField normalize(WaveField f);

/// <a, b> with the cell-volume measure.
cplx inner_product(const WaveField& a, const WaveField& b);
/// |<a, b>|^2 / (|a|^2 |b|^2).
double fidelity(const WaveField& a, const WaveField& b);

/// Probability mass held by the outermost `band` cells of every axis.
double boundary_mass(const WaveField& f, std::size_t band);
std::size_t default_boundary_band(const Grid1D& g);

/// psi(x) = (sigma sqrt(pi))^{-1/2} exp(-(x-x0)^2 / (2 sigma^2) + i k0 x), sampled and normalized.
WaveField gaussian_1d(const Grid1D& g, double x0, double sigma, double k0 = 0.0);
/// Product of two gaussian_1d factors (normalized).
WaveField product_gaussian(const Grid2D& g, double x0, double sigma_x, double y0, double sigma_y);
/// Outer product a(x) b(y) of two 1D fields.
WaveField outer_product(const WaveField& a, const WaveField& b);

struct Configuration {
  double x = 0.0;
  std::optional<double> y;
  double t = 0.0;

  int dims() const { return y ? 2 : 1; }
};

/// Throws Error(LeftGrid) unless every coordinate lies strictly inside the field's grid.
void require_inside(const Configuration& c, const WaveField& f);

struct Trajectory {
  std::vector<Configuration> samples;
  double dt = 0.0;

  /// Checks strictly increasing timestamps with uniform spacing dt (1e-12 tolerance).
  bool is_uniform() const;
  const Configuration& back() const { return samples.back(); }
};

}  // namespace pilotwave
