#include "pilotwave/conditional.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pilotwave {

std::vector<double> marginal_density(const WaveField& f, Axis axis) {
  const std::size_t nx = f.nx();
  const std::size_t ny = f.ny();
  if (axis == Axis::Y && f.dims() != 2) {
    throw Error(ErrorCode::InvalidArgument, "y marginal of a 1D field");
  }
  const double dx = f.x_axis().dx();
  const double dy = f.dims() == 2 ? f.y_axis().dx() : 1.0;
  std::vector<double> rho(axis == Axis::X ? nx : ny, 0.0);
  for (std::size_t ix = 0; ix < nx; ++ix) {
    for (std::size_t iy = 0; iy < ny; ++iy) {
      const double d = std::norm(f(ix, iy));
      if (axis == Axis::X) {
        rho[ix] += d * dy;
      } else {
        rho[iy] += d * dx;
      }
    }
  }
  return rho;
}

WaveField conditional_slice(const WaveField& joint, double y) {
  if (joint.dims() != 2) throw Error(ErrorCode::InvalidArgument, "conditional slice needs a 2D field");
  const Grid1D& gy = joint.y_axis();
  if (!(y >= gy.x_min() && y <= gy.x_max())) {
    throw Error(ErrorCode::InvalidArgument, "slice position " + std::to_string(y) + " outside the y grid");
  }
  const double s = (y - gy.x_min()) / gy.dx();
  auto j = static_cast<std::size_t>(s);
  if (j >= gy.n() - 1) j = gy.n() - 2;
  const double a = s - static_cast<double>(j);
  std::vector<cplx> row(joint.nx());
  for (std::size_t ix = 0; ix < joint.nx(); ++ix) {
    row[ix] = (1.0 - a) * joint(ix, j) + a * joint(ix, j + 1);
  }
  WaveField out(joint.x_axis(), std::move(row), joint.t());
  if (out.norm() < 1e-300) throw Error(ErrorCode::ZeroNorm, "slice at y=" + std::to_string(y) + " is a node");
  return normalize(std::move(out));
}

std::vector<Channel> detect_channels(const WaveField& joint, double threshold, double min_gap) {
  if (!(threshold > 1e-12 && threshold < 1e-2)) {
    throw Error(ErrorCode::InvalidArgument, "channel threshold must lie in (1e-12, 1e-2)");
  }
  const std::vector<double> rho = marginal_density(joint, Axis::Y);
  const Grid1D& gy = joint.y_axis();
  const double peak = *std::max_element(rho.begin(), rho.end());
  if (!(peak > 0.0)) throw Error(ErrorCode::NoChannels, "pointer marginal vanishes");
  const double cut = threshold * peak;

  struct Run {
    std::size_t lo, hi;  // inclusive
  };
  std::vector<Run> runs;
  for (std::size_t j = 0; j < rho.size(); ++j) {
    if (rho[j] <= cut) continue;
    if (!runs.empty() && runs.back().hi + 1 == j) {
      runs.back().hi = j;
    } else {
      runs.push_back({j, j});
    }
  }
  if (min_gap > 0.0) {
    std::vector<Run> merged;
    for (const Run& r : runs) {
      if (!merged.empty()) {
        const double gap = gy.coord(r.lo) - gy.coord(merged.back().hi) - gy.dx();
        if (gap < min_gap) {
          merged.back().hi = r.hi;
          continue;
        }
      }
      merged.push_back(r);
    }
    runs = std::move(merged);
  }
  if (runs.empty()) throw Error(ErrorCode::NoChannels, "no pointer channel above threshold");

  std::vector<Channel> out;
  out.reserve(runs.size());
  for (const Run& r : runs) {
    Channel c;
    c.y_lo = std::max(gy.x_min(), gy.coord(r.lo) - 0.5 * gy.dx());
    c.y_hi = std::min(gy.x_max(), gy.coord(r.hi) + 0.5 * gy.dx());
    double m = 0.0;
    double my = 0.0;
    for (std::size_t j = r.lo; j <= r.hi; ++j) {
      m += rho[j] * gy.dx();
      my += rho[j] * gy.dx() * gy.coord(j);
    }
    c.weight = m;
    c.centroid = my / m;
    out.push_back(c);
  }
  return out;
}

EffectiveReport effective_exists(const WaveField& joint, double y, double threshold,
                                 double min_gap) {
  EffectiveReport rep;
  for (const Channel& c : detect_channels(joint, threshold, min_gap)) {
    if (c.contains(y)) {
      rep.exists = true;
      rep.channel = c;
      break;
    }
  }
  return rep;
}

std::vector<cplx> GjResidual::reduced() const {
  std::vector<cplx> out(raw.size(), cplx{});
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!mask[i]) out[i] = raw[i] - gauge;
  }
  return out;
}

std::size_t GjResidual::evaluated() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{0}));
}

double GjResidual::max_reduced_in_bulk(const WaveField& psi, double fraction) const {
  const std::size_t n = raw.size();
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + std::norm(psi.values()[i]);
  const double total = cum[n];
  const double lo = 0.5 * (1.0 - fraction) * total;
  const double hi = 0.5 * (1.0 + fraction) * total;
  const std::vector<cplx> r = reduced();
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] || cum[i + 1] < lo || cum[i] > hi) continue;
    m = std::max(m, std::abs(r[i]));
  }
  return m;
}

GjResidual gj_residual(const WaveField& prev, const WaveField& cur, const WaveField& next,
                       double dt, const std::vector<double>& potential_row, double mass,
                       double node_epsilon) {
  if (cur.dims() != 1 || !cur.same_grid(prev) || !cur.same_grid(next)) {
    throw Error(ErrorCode::InvalidArgument, "residual needs three 1D slices on one grid");
  }
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "slice spacing must be positive");
  const std::size_t n = cur.nx();
  if (!potential_row.empty() && potential_row.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "potential row size mismatch");
  }
  const double dx = cur.x_axis().dx();
  GjResidual res{cur.x_axis(), std::vector<cplx>(n), std::vector<std::uint8_t>(n, 1), cplx{}};

  const double cp = node_epsilon * prev.max_density();
  const double cc = node_epsilon * cur.max_density();
  const double cn = node_epsilon * next.max_density();
  const cplx i1{0.0, 1.0};
  double wsum = 0.0;
  cplx acc{};
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (std::norm(prev(k)) < cp || std::norm(next(k)) < cn) continue;
    if (std::norm(cur(k)) < cc || std::norm(cur(k - 1)) < cc || std::norm(cur(k + 1)) < cc) continue;
    const cplx dpsi_dt = (next(k) - prev(k)) / (2.0 * dt);
    const cplx lap = (cur(k + 1) - 2.0 * cur(k) + cur(k - 1)) / (dx * dx);
    const double u = potential_row.empty() ? 0.0 : potential_row[k];
    res.raw[k] = (i1 * dpsi_dt + lap / (2.0 * mass) - u * cur(k)) / cur(k);
    res.mask[k] = 0;
    const double w = std::norm(cur(k));
    acc += w * res.raw[k];
    wsum += w;
  }
  if (wsum == 0.0) throw Error(ErrorCode::HitNode, "no point of the conditional slice is above the node threshold");
  res.gauge = acc / wsum;
  return res;
}

}  // namespace pilotwave
