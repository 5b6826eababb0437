#include "pilotwave/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace pilotwave {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::UnknownDimension: return "UnknownDimension";
    case ErrorCode::BoundaryMassExceeded: return "BoundaryMassExceeded";
    case ErrorCode::NonUnitaryStep: return "NonUnitaryStep";
    case ErrorCode::AllNodes: return "AllNodes";
    case ErrorCode::LeftGrid: return "LeftGrid";
    case ErrorCode::HitNode: return "HitNode";
    case ErrorCode::NoChannels: return "NoChannels";
    case ErrorCode::TooFewSelected: return "TooFewSelected";
    case ErrorCode::MismatchedTimes: return "MismatchedTimes";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ZeroDuration: return "ZeroDuration";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroNorm:
    case ErrorCode::BoundaryMassExceeded:
    case ErrorCode::NonUnitaryStep:
    case ErrorCode::AllNodes:
    case ErrorCode::LeftGrid:
    case ErrorCode::HitNode:
    case ErrorCode::NoChannels:
    case ErrorCode::NonFinite:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::Length: return "length";
    case Dimension::Time: return "time";
    case Dimension::Velocity: return "velocity";
    case Dimension::Momentum: return "momentum";
    case Dimension::Mass: return "mass";
  }
  return "?";
}

Dimension parse_dimension(std::string_view tag) {
  for (auto d : {Dimension::Length, Dimension::Time, Dimension::Velocity, Dimension::Momentum,
                 Dimension::Mass}) {
    if (tag == to_string(d)) return d;
  }
  throw Error(ErrorCode::UnknownDimension, "no dimension named '" + std::string(tag) + "'");
}

double UnitSystem::unit_of(Dimension d) const {
  switch (d) {
    case Dimension::Length: return length_unit;
    case Dimension::Time: return time_unit();
    case Dimension::Velocity: return velocity_unit();
    case Dimension::Momentum: return momentum_unit();
    case Dimension::Mass: return mass;
  }
  throw Error(ErrorCode::UnknownDimension, "unhandled dimension");
}

double convert_si_to_scaled(const UnitSystem& u, double si_value, Dimension d) {
  return si_value / u.unit_of(d);
}

double convert_si_to_scaled(const UnitSystem& u, double si_value, std::string_view dimension_tag) {
  return convert_si_to_scaled(u, si_value, parse_dimension(dimension_tag));
}

double convert_scaled_to_si(const UnitSystem& u, double scaled_value, Dimension d) {
  return scaled_value * u.unit_of(d);
}

// ---------------------------------------------------------------------------

Grid1D::Grid1D(std::size_t n, double x_min, double x_max) : n_(n), x_min_(x_min), x_max_(x_max) {
  if (n < 8) throw Error(ErrorCode::InvalidArgument, "grid needs at least 8 points");
  if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
    throw Error(ErrorCode::InvalidArgument, "grid extent must satisfy x_min < x_max");
  }
  dx_ = (x_max - x_min) / static_cast<double>(n - 1);
}

std::size_t Grid1D::nearest(double x) const {
  const double s = std::round((x - x_min_) / dx_);
  if (s <= 0.0) return 0;
  if (s >= static_cast<double>(n_ - 1)) return n_ - 1;
  return static_cast<std::size_t>(s);
}

std::vector<double> Grid1D::wave_numbers() const {
  std::vector<double> k(n_);
  const double dk = 2.0 * std::numbers::pi / (static_cast<double>(n_) * dx_);
  for (std::size_t i = 0; i < n_; ++i) {
    const auto m = static_cast<long>(i);
    const long signed_m = (i < (n_ + 1) / 2) ? m : m - static_cast<long>(n_);
    k[i] = dk * static_cast<double>(signed_m);
  }
  return k;
}

void Grid1D::require_spectral() const {
  if (!is_power_of_two()) {
    throw Error(ErrorCode::InvalidArgument,
                "spectral evolution needs a power-of-two point count, got " + std::to_string(n_));
  }
}

// ---------------------------------------------------------------------------

namespace {

void require_finite(std::span<const cplx> v) {
  for (const auto& z : v) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw Error(ErrorCode::NonFinite, "wave field contains non-finite values");
    }
  }
}

}  // namespace

WaveField::WaveField(Grid1D x, std::vector<cplx> values, double t)
    : x_(std::move(x)), values_(std::move(values)), t_(t) {
  if (values_.size() != x_.n()) throw Error(ErrorCode::InvalidArgument, "value count != grid size");
  require_finite(values_);
}

WaveField::WaveField(Grid2D g, std::vector<cplx> values, double t)
    : x_(std::move(g.x)), y_(std::move(g.y)), values_(std::move(values)), t_(t) {
  if (values_.size() != x_.n() * y_->n()) {
    throw Error(ErrorCode::InvalidArgument, "value count != grid size");
  }
  require_finite(values_);
}

const Grid1D& WaveField::y_axis() const {
  if (!y_) throw Error(ErrorCode::InvalidArgument, "1D field has no y axis");
  return *y_;
}

double WaveField::norm_squared() const {
  double s = 0.0;
  for (const auto& z : values_) s += std::norm(z);
  return s * cell_volume();
}

double WaveField::norm() const { return std::sqrt(norm_squared()); }

double WaveField::max_density() const {
  double m = 0.0;
  for (const auto& z : values_) m = std::max(m, std::norm(z));
  return m;
}

bool WaveField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](const cplx& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

WaveField normalize(WaveField f) {
  const double n = f.norm();
  if (!(n >= 1e-300)) throw Error(ErrorCode::ZeroNorm, "cannot normalize a field with zero norm");
  const double s = 1.0 / n;
  for (auto& z : f.values()) z *= s;
  return f;
}

cplx inner_product(const WaveField& a, const WaveField& b) {
  if (!a.same_grid(b)) throw Error(ErrorCode::InvalidArgument, "inner product across grids");
  cplx s{0.0, 0.0};
  const auto va = a.values();
  const auto vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) s += std::conj(va[i]) * vb[i];
  return s * a.cell_volume();
}

double fidelity(const WaveField& a, const WaveField& b) {
  const double na = a.norm_squared();
  const double nb = b.norm_squared();
  if (na < 1e-300 || nb < 1e-300) throw Error(ErrorCode::ZeroNorm, "fidelity of a zero field");
  return std::norm(inner_product(a, b)) / (na * nb);
}

double boundary_mass(const WaveField& f, std::size_t band) {
  const std::size_t nx = f.nx();
  const std::size_t ny = f.ny();
  const std::size_t by = f.dims() == 2 ? band : 0;
  double s = 0.0;
  for (std::size_t ix = 0; ix < nx; ++ix) {
    const bool edge_x = ix < band || ix + band >= nx;
    for (std::size_t iy = 0; iy < ny; ++iy) {
      const bool edge_y = iy < by || iy + by >= ny;
      if (edge_x || edge_y) s += std::norm(f(ix, iy));
    }
  }
  return s * f.cell_volume();
}

std::size_t default_boundary_band(const Grid1D& g) { return std::max<std::size_t>(4, g.n() / 32); }

WaveField gaussian_1d(const Grid1D& g, double x0, double sigma, double k0) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gaussian width must be positive");
  std::vector<cplx> v(g.n());
  const double amp = 1.0 / std::sqrt(sigma * std::sqrt(std::numbers::pi));
  for (std::size_t i = 0; i < g.n(); ++i) {
    const double x = g.coord(i);
    const double u = (x - x0) / sigma;
    v[i] = amp * std::exp(cplx(-0.5 * u * u, k0 * x));
  }
  return normalize(WaveField(g, std::move(v)));
}

WaveField product_gaussian(const Grid2D& g, double x0, double sigma_x, double y0, double sigma_y) {
  return normalize(outer_product(gaussian_1d(g.x, x0, sigma_x), gaussian_1d(g.y, y0, sigma_y)));
}

WaveField outer_product(const WaveField& a, const WaveField& b) {
  if (a.dims() != 1 || b.dims() != 1) {
    throw Error(ErrorCode::InvalidArgument, "outer product needs two 1D fields");
  }
  const std::size_t nx = a.nx();
  const std::size_t ny = b.nx();
  std::vector<cplx> v(nx * ny);
  for (std::size_t ix = 0; ix < nx; ++ix) {
    for (std::size_t iy = 0; iy < ny; ++iy) v[ix * ny + iy] = a(ix) * b(iy);
  }
  return WaveField(Grid2D{a.x_axis(), b.x_axis()}, std::move(v), a.t());
}

void require_inside(const Configuration& c, const WaveField& f) {
  if (c.dims() != f.dims()) {
    throw Error(ErrorCode::InvalidArgument, "configuration and field dimensionality differ");
  }
  if (!f.x_axis().contains_strictly(c.x) || (c.y && !f.y_axis().contains_strictly(*c.y))) {
    throw Error(ErrorCode::LeftGrid, "configuration outside the grid");
  }
}

bool Trajectory::is_uniform() const {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double step = samples[i].t - samples[i - 1].t;
    if (!(step > 0.0)) return false;
    if (std::abs(step - dt) > 1e-12 * std::max(1.0, std::abs(samples[i].t))) return false;
  }
  return true;
}

}  // namespace pilotwave
