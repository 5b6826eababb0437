#include "pilotwave/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

namespace pilotwave {

CellCdf::CellCdf(const Grid1D& grid, std::span<const double> density, Interp interp)
    : interp_(interp), dx_(grid.dx()) {
  const std::size_t n = grid.n();
  if (density.size() != n) throw Error(ErrorCode::InvalidArgument, "density size mismatch");
  for (double d : density) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw Error(ErrorCode::NonFinite, "density must be finite and non-negative");
    }
  }
  if (interp_ == Interp::Cells) {
    edges_.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      edges_[i] = grid.x_min() + (static_cast<double>(i) - 0.5) * grid.dx();
    }
    edges_.front() = grid.x_min();
    edges_.back() = grid.x_max();
    cum_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cum_[i + 1] = cum_[i] + density[i] * (edges_[i + 1] - edges_[i]);
  } else {
    edges_.resize(n);
    for (std::size_t i = 0; i < n; ++i) edges_[i] = grid.coord(i);
    edges_.back() = grid.x_max();
    cum_.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      cum_[i + 1] = cum_[i] + 0.5 * (density[i] + density[i + 1]) * (edges_[i + 1] - edges_[i]);
    }
  }
  const double total = cum_.back();
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroNorm, "density integrates to zero");
  for (double& c : cum_) c /= total;
  cum_.back() = 1.0;
  if (interp_ == Interp::Linear) {
    rho_.assign(density.begin(), density.end());
    for (double& r : rho_) r /= total;
  }
}

std::size_t CellCdf::segment(double x) const {
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
  if (it == edges_.begin()) return 0;
  return std::min(static_cast<std::size_t>(it - edges_.begin()) - 1, edges_.size() - 2);
}

std::size_t CellCdf::cell_of(double x) const {
  if (interp_ == Interp::Cells) return segment(x);
  const std::size_t i = segment(x);
  return x - edges_[i] < 0.5 * dx_ ? i : i + 1;
}

double CellCdf::cdf(double x) const {
  if (x <= edges_.front()) return 0.0;
  if (x >= edges_.back()) return 1.0;
  const std::size_t i = segment(x);
  const double w = edges_[i + 1] - edges_[i];
  const double a = x - edges_[i];
  if (interp_ == Interp::Cells) return cum_[i] + a / w * (cum_[i + 1] - cum_[i]);
  return cum_[i] + a * (rho_[i] + 0.5 * a * (rho_[i + 1] - rho_[i]) / w);
}

double CellCdf::quantile(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  // First segment whose upper cumulative value reaches u; zero-mass segments are skipped.
  const auto it = std::lower_bound(cum_.begin() + 1, cum_.end(), u);
  const std::size_t i = std::min(static_cast<std::size_t>(it - cum_.begin()) - 1, cum_.size() - 2);
  const double w = edges_[i + 1] - edges_[i];
  const double m = cum_[i + 1] - cum_[i];
  if (!(m > 0.0)) return edges_[i];
  double a;
  if (interp_ == Interp::Cells) {
    a = (u - cum_[i]) / m * w;
  } else {
    // Solve a r0 + a^2 s / 2 = c in the cancellation-free form.
    const double c = u - cum_[i];
    const double r0 = rho_[i];
    const double s = (rho_[i + 1] - rho_[i]) / w;
    const double disc = std::max(0.0, r0 * r0 + 2.0 * s * c);
    const double den = r0 + std::sqrt(disc);
    a = den > 0.0 ? 2.0 * c / den : 0.0;
  }
  return edges_[i] + std::clamp(a, 0.0, w);
}

namespace {

// 53-bit uniform on the open interval (0, 1), independent of the standard library's distributions.
double open_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

std::vector<double> row_density(const WaveField& f, std::size_t ix) {
  std::vector<double> r(f.ny());
  for (std::size_t iy = 0; iy < f.ny(); ++iy) r[iy] = std::norm(f(ix, iy));
  return r;
}

}  // namespace

CellCdf marginal_cdf(const WaveField& f, Axis axis) {
  const auto rho = marginal_density(f, axis);
  if (axis == Axis::X) return CellCdf(f.x_axis(), rho);
  return CellCdf(f.y_axis(), rho, Interp::Linear);
}

std::vector<Configuration> sample_configurations(const EnsembleSpec& spec) {
  if (spec.n < 1) throw Error(ErrorCode::InvalidArgument, "ensemble size must be at least 1");
  const WaveField& f = spec.source;
  std::mt19937_64 rng(spec.seed);
  const CellCdf fx = marginal_cdf(f, Axis::X);
  std::map<std::size_t, CellCdf> rows;
  std::vector<Configuration> out;
  out.reserve(spec.n);
  for (std::size_t k = 0; k < spec.n; ++k) {
    Configuration c;
    c.t = f.t();
    c.x = fx.quantile(open_uniform(rng));
    if (f.dims() == 2) {
      const std::size_t ix = fx.cell_of(c.x);
      auto it = rows.find(ix);
      if (it == rows.end()) it = rows.emplace(ix, CellCdf(f.y_axis(), row_density(f, ix), Interp::Linear)).first;
      c.y = it->second.quantile(open_uniform(rng));
    }
    out.push_back(c);
  }
  return out;
}

double ks_critical(std::size_t n) { return kKsCoefficient1pct / std::sqrt(static_cast<double>(n)); }

double ks_statistic(std::vector<double> samples, const CellCdf& model) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "KS statistic of an empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = model.cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

StatReport ks_report(std::string test, std::string label, std::span<const double> samples,
                     const CellCdf& model) {
  StatReport r;
  r.test = std::move(test);
  r.label = std::move(label);
  r.n = samples.size();
  r.statistic = ks_statistic(std::vector<double>(samples.begin(), samples.end()), model);
  r.critical = ks_critical(r.n);
  r.pass = r.statistic < r.critical;
  return r;
}

StatReport chi_square_report(std::string test, std::string label, std::span<const double> samples,
                             const CellCdf& model, std::size_t bins) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "chi-square of an empty sample");
  const std::size_t n = samples.size();
  if (bins == 0) bins = std::clamp<std::size_t>(n / 50, 5, 50);
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "chi-square needs at least two bins");
  std::vector<double> count(bins, 0.0);
  for (double s : samples) {
    const auto b = static_cast<std::size_t>(model.cdf(s) * static_cast<double>(bins));
    count[std::min(b, bins - 1)] += 1.0;
  }
  const double expected = static_cast<double>(n) / static_cast<double>(bins);
  double chi2 = 0.0;
  for (double c : count) chi2 += (c - expected) * (c - expected) / expected;
  StatReport r;
  r.test = std::move(test);
  r.label = std::move(label);
  r.n = n;
  r.statistic = chi2;
  r.critical = boost::math::quantile(boost::math::chi_squared(static_cast<double>(bins - 1)), 0.99);
  r.pass = r.statistic < r.critical;
  return r;
}

namespace {

void require_same_time(std::span<const Configuration> endpoints, const WaveField& field) {
  if (endpoints.empty()) throw Error(ErrorCode::InvalidArgument, "empty ensemble");
  const double tol = 1e-9 * std::max(1.0, std::abs(field.t()));
  for (const auto& c : endpoints) {
    if (std::abs(c.t - field.t()) > tol) {
      throw Error(ErrorCode::MismatchedTimes, "endpoint time " + std::to_string(c.t) +
                                                  " differs from field time " + std::to_string(field.t()));
    }
  }
}

std::vector<double> coordinates(std::span<const Configuration> cs, Axis axis) {
  std::vector<double> v;
  v.reserve(cs.size());
  for (const auto& c : cs) {
    if (axis == Axis::Y && !c.y) throw Error(ErrorCode::InvalidArgument, "configuration has no y");
    v.push_back(axis == Axis::X ? c.x : *c.y);
  }
  return v;
}

const char* axis_name(Axis a) { return a == Axis::X ? "x" : "y"; }

}  // namespace

StatReport check_equivariance(std::span<const Configuration> endpoints, const WaveField& field,
                              Axis axis) {
  require_same_time(endpoints, field);
  StatReport r = ks_report("equivariance", axis_name(axis), coordinates(endpoints, axis),
                           marginal_cdf(field, axis));
  r.t = field.t();
  return r;
}

std::vector<StatReport> check_equivariance(std::span<const Configuration> endpoints,
                                           const WaveField& field) {
  std::vector<StatReport> out{check_equivariance(endpoints, field, Axis::X)};
  if (field.dims() == 2) out.push_back(check_equivariance(endpoints, field, Axis::Y));
  return out;
}

StatReport check_equivariance_chi2(std::span<const Configuration> endpoints, const WaveField& field,
                                   Axis axis) {
  require_same_time(endpoints, field);
  StatReport r = chi_square_report("equivariance-chi2", axis_name(axis), coordinates(endpoints, axis),
                                   marginal_cdf(field, axis));
  r.t = field.t();
  return r;
}

namespace {

struct Selection {
  std::vector<double> x;
  CellCdf model;
};

Selection select_window(const WaveField& field, std::span<const Configuration> endpoints,
                        double y_lo, double y_hi, std::size_t min_selected) {
  if (field.dims() != 2) throw Error(ErrorCode::InvalidArgument, "conditional check needs a 2D field");
  if (!(y_hi > y_lo)) throw Error(ErrorCode::InvalidArgument, "empty conditioning window");
  require_same_time(endpoints, field);
  std::vector<double> xs;
  for (const auto& c : endpoints) {
    if (c.y && *c.y >= y_lo && *c.y <= y_hi) xs.push_back(c.x);
  }
  if (xs.size() < min_selected) {
    throw Error(ErrorCode::TooFewSelected, std::to_string(xs.size()) + " endpoints in the window, need " +
                                               std::to_string(min_selected));
  }
  const WaveField slice = conditional_slice(field, 0.5 * (y_lo + y_hi));
  return {std::move(xs), marginal_cdf(slice, Axis::X)};
}

std::string window_label(double lo, double hi) {
  return "y in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
}

}  // namespace

StatReport check_conditional_probability(const WaveField& field,
                                         std::span<const Configuration> endpoints, double y_lo,
                                         double y_hi, std::size_t min_selected) {
  const Selection s = select_window(field, endpoints, y_lo, y_hi, min_selected);
  StatReport r = ks_report("conditional-probability", window_label(y_lo, y_hi), s.x, s.model);
  r.t = field.t();
  return r;
}

StatReport check_conditional_probability_chi2(const WaveField& field,
                                              std::span<const Configuration> endpoints,
                                              double y_lo, double y_hi, std::size_t min_selected) {
  const Selection s = select_window(field, endpoints, y_lo, y_hi, min_selected);
  StatReport r = chi_square_report("conditional-probability-chi2", window_label(y_lo, y_hi), s.x, s.model);
  r.t = field.t();
  return r;
}

void transport_pointer(std::span<Configuration> ensemble, const WaveField& before,
                       const WaveField& after) {
  if (before.dims() != 2 || !before.same_grid(after)) {
    throw Error(ErrorCode::InvalidArgument, "pointer transport needs two 2D fields on one grid");
  }
  const CellCdf fx = marginal_cdf(before, Axis::X);
  std::map<std::size_t, std::pair<CellCdf, CellCdf>> cols;
  for (auto& c : ensemble) {
    if (!c.y) throw Error(ErrorCode::InvalidArgument, "configuration has no y");
    const std::size_t ix = fx.cell_of(c.x);
    auto it = cols.find(ix);
    if (it == cols.end()) {
      it = cols.emplace(ix, std::make_pair(CellCdf(before.y_axis(), row_density(before, ix), Interp::Linear),
                                           CellCdf(after.y_axis(), row_density(after, ix), Interp::Linear)))
               .first;
    }
    c.y = it->second.second.quantile(it->second.first.cdf(*c.y));
  }
}

}  // namespace pilotwave
