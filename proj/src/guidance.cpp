#include "pilotwave/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pilotwave {

double VelocityField::vx(std::size_t ix, std::size_t iy) const {
  return kin_x_.empty() ? 0.0 : kin_x_[ix * ny_ + iy];
}

double VelocityField::vy(std::size_t ix, std::size_t iy) const {
  double v = kin_y_.empty() ? 0.0 : kin_y_[ix * ny_ + iy];
  if (drift_) v += drift_->g * drift_->a[ix];
  return v;
}

std::size_t VelocityField::masked_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

namespace {

struct Cell {
  std::size_t i;
  double frac;
};

Cell locate(const Grid1D& g, double x) {
  if (!(x >= g.x_min() && x <= g.x_max())) {
    throw Error(ErrorCode::LeftGrid, "position " + std::to_string(x) + " outside [" +
                                         std::to_string(g.x_min()) + ", " +
                                         std::to_string(g.x_max()) + "]");
  }
  const double s = (x - g.x_min()) / g.dx();
  auto i = static_cast<std::size_t>(s);
  if (i >= g.n() - 1) i = g.n() - 2;
  return {i, s - static_cast<double>(i)};
}

}  // namespace

std::optional<std::array<double, 2>> VelocityField::sample(double x, double y) const {
  std::array<double, 2> v{0.0, 0.0};
  const Cell cx = locate(x_, x);
  if (!y_) {
    if (has_kinetic()) {
      if (mask_[cx.i] || mask_[cx.i + 1]) return std::nullopt;
      v[0] = (1.0 - cx.frac) * kin_x_[cx.i] + cx.frac * kin_x_[cx.i + 1];
    }
    return v;
  }
  const Cell cy = locate(*y_, y);
  if (has_kinetic()) {
    const std::size_t i00 = cx.i * ny_ + cy.i;
    const std::size_t i01 = i00 + 1;
    const std::size_t i10 = i00 + ny_;
    const std::size_t i11 = i10 + 1;
    if (mask_[i00] || mask_[i01] || mask_[i10] || mask_[i11]) return std::nullopt;
    const double w00 = (1.0 - cx.frac) * (1.0 - cy.frac);
    const double w01 = (1.0 - cx.frac) * cy.frac;
    const double w10 = cx.frac * (1.0 - cy.frac);
    const double w11 = cx.frac * cy.frac;
    v[0] = w00 * kin_x_[i00] + w01 * kin_x_[i01] + w10 * kin_x_[i10] + w11 * kin_x_[i11];
    v[1] = w00 * kin_y_[i00] + w01 * kin_y_[i01] + w10 * kin_y_[i10] + w11 * kin_y_[i11];
  }
  if (drift_) v[1] += drift_->g * drift_->a_at(x, x_);
  return v;
}

VelocityField VelocityField::blend(const VelocityField& lo, const VelocityField& hi, double a,
                                   double t) {
  if (!(lo.x_ == hi.x_) || lo.y_ != hi.y_) {
    throw Error(ErrorCode::InvalidArgument, "blending velocity fields on different grids");
  }
  VelocityField out = lo;
  out.t_ = t;
  const auto mix = [a](const std::vector<double>& p, const std::vector<double>& q,
                       std::size_t n) {
    std::vector<double> r(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double pv = p.empty() ? 0.0 : p[i];
      const double qv = q.empty() ? 0.0 : q[i];
      r[i] = (1.0 - a) * pv + a * qv;
    }
    return r;
  };
  const std::size_t n = lo.mask_.size();
  if (lo.has_kinetic() || hi.has_kinetic()) {
    out.kin_x_ = mix(lo.kin_x_, hi.kin_x_, n);
    if (lo.y_) out.kin_y_ = mix(lo.kin_y_, hi.kin_y_, n);
  }
  for (std::size_t i = 0; i < n; ++i) out.mask_[i] = lo.mask_[i] | hi.mask_[i];
  return out;
}

VelocityField velocity_from_field(const WaveField& f, const Hamiltonian& h, double node_epsilon,
                                  Side side) {
  const bool before = side == Side::Before;
  VelocityField v;
  v.x_ = f.x_axis();
  if (f.dims() == 2) v.y_ = f.y_axis();
  v.ny_ = f.ny();
  v.t_ = f.t();

  const std::size_t nx = f.nx();
  const std::size_t ny = f.ny();
  const double cut = node_epsilon * f.max_density();
  v.mask_.resize(f.size());
  std::size_t masked = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const bool m = std::norm(f.values()[i]) < cut || std::norm(f.values()[i]) == 0.0;
    v.mask_[i] = m ? 1 : 0;
    masked += m ? 1 : 0;
  }
  if (masked == f.size()) throw Error(ErrorCode::AllNodes, "every grid point is a node");

  if (before ? h.kinetic_active_before(f.t()) : h.kinetic_active(f.t())) {
    // (1/m) Im(d psi / psi) with centered differences, one-sided at the edges.
    const auto deriv = [&](std::size_t ix, std::size_t iy, bool along_x) -> double {
      const std::size_t n = along_x ? nx : ny;
      const std::size_t j = along_x ? ix : iy;
      const double d = along_x ? f.x_axis().dx() : f.y_axis().dx();
      const auto at = [&](std::size_t k) { return along_x ? f(k, iy) : f(ix, k); };
      cplx num;
      if (j == 0) {
        num = (at(1) - at(0)) / d;
      } else if (j + 1 == n) {
        num = (at(n - 1) - at(n - 2)) / d;
      } else {
        num = (at(j + 1) - at(j - 1)) / (2.0 * d);
      }
      return (num / f(ix, iy)).imag();
    };
    v.kin_x_.assign(f.size(), 0.0);
    if (f.dims() == 2) v.kin_y_.assign(f.size(), 0.0);
    for (std::size_t ix = 0; ix < nx; ++ix) {
      for (std::size_t iy = 0; iy < ny; ++iy) {
        const std::size_t i = ix * ny + iy;
        if (v.mask_[i]) continue;
        v.kin_x_[i] = deriv(ix, iy, true) / h.mass_x;
        if (f.dims() == 2) v.kin_y_[i] = deriv(ix, iy, false) / h.mass_y;
      }
    }
  }
  if (before ? h.coupling_active_before(f.t()) : h.coupling_active(f.t())) v.drift_ = h.coupling;
  return v;
}

// ---------------------------------------------------------------------------

SnapshotHistory::SnapshotHistory(std::vector<WaveField> snapshots, Hamiltonian h)
    : snapshots_(std::move(snapshots)), h_(std::move(h)) {
  if (snapshots_.empty()) throw Error(ErrorCode::InvalidArgument, "empty snapshot history");
  for (std::size_t i = 1; i < snapshots_.size(); ++i) {
    if (!(snapshots_[i].t() > snapshots_[i - 1].t())) {
      throw Error(ErrorCode::InvalidArgument, "snapshot times must increase");
    }
  }
}

const VelocityField& SnapshotHistory::velocity(double t, Side side) {
  const auto snapshot_velocity = [&](std::size_t k) -> const VelocityField& {
    auto it = at_snapshot_.find({k, side});
    if (it == at_snapshot_.end()) {
      it = at_snapshot_
               .emplace(std::pair{k, side}, velocity_from_field(snapshots_[k], h_, kNodeEpsilon, side))
               .first;
    }
    return it->second;
  };
  const double eps = 1e-12 * std::max(1.0, std::abs(t));
  if (t < snapshots_.front().t() - eps || t > snapshots_.back().t() + eps) {
    throw Error(ErrorCode::MismatchedTimes, "time outside the stored history");
  }
  if (auto it = blended_.find({t, side}); it != blended_.end()) return it->second;
  const auto upper = std::lower_bound(snapshots_.begin(), snapshots_.end(), t,
                                      [](const WaveField& f, double v) { return f.t() < v; });
  std::size_t hi = static_cast<std::size_t>(upper - snapshots_.begin());
  if (hi < snapshots_.size() && std::abs(snapshots_[hi].t() - t) <= eps) {
    return snapshot_velocity(hi);
  }
  if (hi == 0) return snapshot_velocity(0);
  if (hi == snapshots_.size()) return snapshot_velocity(hi - 1);
  const std::size_t lo = hi - 1;
  const double a = (t - snapshots_[lo].t()) / (snapshots_[hi].t() - snapshots_[lo].t());
  VelocityField v = VelocityField::blend(snapshot_velocity(lo), snapshot_velocity(hi), a, t);
  // Which terms apply is decided at t itself, not at the neighbouring snapshots.
  const bool before = side == Side::Before;
  if (!(before ? h_.kinetic_active_before(t) : h_.kinetic_active(t))) {
    v.kin_x_.clear();
    v.kin_y_.clear();
  }
  v.drift_.reset();
  if (before ? h_.coupling_active_before(t) : h_.coupling_active(t)) v.drift_ = h_.coupling;
  return blended_.emplace(std::pair{t, side}, std::move(v)).first->second;
}

void SnapshotHistory::release_before(double t) {
  blended_.erase(blended_.begin(), blended_.lower_bound({t, Side::After}));
  for (auto it = at_snapshot_.begin(); it != at_snapshot_.end();) {
    const std::size_t k = it->first.first;
    if (k + 1 < snapshots_.size() && snapshots_[k + 1].t() < t) {
      it = at_snapshot_.erase(it);
    } else {
      ++it;
    }
  }
}

// ---------------------------------------------------------------------------

const VelocityField& FieldSource::velocity_at(double t) {
  if (auto it = velocities_.find(t); it != velocities_.end()) return it->second;
  return velocities_.emplace(t, velocity_from_field(field_at(t), h_)).first->second;
}

const VelocityField& FieldSource::velocity_before(double t) {
  if (auto it = before_.find(t); it != before_.end()) return it->second;
  return before_.emplace(t, velocity_from_field(field_at(t), h_, kNodeEpsilon, Side::Before))
      .first->second;
}

void FieldSource::release_before(double t) {
  velocities_.erase(velocities_.begin(), velocities_.lower_bound(t));
  before_.erase(before_.begin(), before_.lower_bound(t));
}

FieldFunctionSource::FieldFunctionSource(std::function<WaveField(double)> fn, Hamiltonian h)
    : FieldSource(std::move(h)), fn_(std::move(fn)) {}

const WaveField& FieldFunctionSource::field_at(double t) {
  if (auto it = fields_.find(t); it != fields_.end()) return it->second;
  WaveField f = fn_(t);
  f.set_t(t);
  return fields_.emplace(t, std::move(f)).first->second;
}

void FieldFunctionSource::release_before(double t) {
  FieldSource::release_before(t);
  fields_.erase(fields_.begin(), fields_.lower_bound(t));
}

OnTheFlyEvolver::OnTheFlyEvolver(WaveField initial, Hamiltonian h, Method method, double max_dt)
    : FieldSource(std::move(h)),
      prop_(make_propagator(h_, initial, method)),
      max_dt_(max_dt),
      monitor_(initial) {
  if (!(max_dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "max_dt must be positive");
  const double t0 = initial.t();
  fields_.emplace(t0, std::move(initial));
}

const WaveField& OnTheFlyEvolver::field_at(double t) {
  auto it = fields_.upper_bound(t);
  if (it == fields_.begin()) {
    throw Error(ErrorCode::MismatchedTimes, "requested time precedes the retained field history");
  }
  --it;
  if (it->first == t) return it->second;
  const double t0 = it->first;
  WaveField f = it->second;
  const double span = t - t0;
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(span / max_dt_ - 1e-9)));
  for (std::size_t k = 1; k <= n; ++k) {
    const double target = k == n ? t : t0 + span * static_cast<double>(k) / static_cast<double>(n);
    advance(*prop_, h_, f, target);
    monitor_.check(f);
  }
  return fields_.emplace(t, std::move(f)).first->second;
}

void OnTheFlyEvolver::release_before(double t) {
  FieldSource::release_before(t);
  auto keep = fields_.upper_bound(t);
  if (keep == fields_.begin()) return;
  --keep;
  fields_.erase(fields_.begin(), keep);
}

// ---------------------------------------------------------------------------

namespace {

using Point = std::array<double, 2>;

std::optional<Point> rk4(const Point& p, double h, const VelocityField& v0, const VelocityField& vh,
                         const VelocityField& v1, int dims) {
  const auto at = [dims](const VelocityField& v, const Point& q) {
    return dims == 2 ? v.sample(q[0], q[1]) : v.sample(q[0]);
  };
  const auto k1 = at(v0, p);
  if (!k1) return std::nullopt;
  const Point p2{p[0] + 0.5 * h * (*k1)[0], p[1] + 0.5 * h * (*k1)[1]};
  const auto k2 = at(vh, p2);
  if (!k2) return std::nullopt;
  const Point p3{p[0] + 0.5 * h * (*k2)[0], p[1] + 0.5 * h * (*k2)[1]};
  const auto k3 = at(vh, p3);
  if (!k3) return std::nullopt;
  const Point p4{p[0] + h * (*k3)[0], p[1] + h * (*k3)[1]};
  const auto k4 = at(v1, p4);
  if (!k4) return std::nullopt;
  Point out;
  for (int d = 0; d < 2; ++d) {
    out[d] = p[d] + h / 6.0 * ((*k1)[d] + 2.0 * (*k2)[d] + 2.0 * (*k3)[d] + (*k4)[d]);
  }
  at(v1, out);  // throws LeftGrid if the step left the grid
  return out;
}

}  // namespace

std::vector<Configuration> integrate_ensemble(VelocitySource& src,
                                              std::span<const Configuration> starts, double dt,
                                              std::size_t steps, const StepObserver& observe,
                                              const IntegrationOptions& opts) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "trajectory dt must be positive");
  if (starts.empty()) return {};
  const int dims = starts.front().dims();
  const double t0 = starts.front().t;
  for (const auto& c : starts) {
    if (c.dims() != dims || c.t != t0) {
      throw Error(ErrorCode::InvalidArgument, "ensemble starts must share dimension and time");
    }
  }

  std::vector<Point> pos(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) pos[i] = {starts[i].x, starts[i].y.value_or(0.0)};
  std::vector<Configuration> current(starts.begin(), starts.end());

  const auto publish = [&](std::size_t step, double t) {
    for (std::size_t i = 0; i < pos.size(); ++i) {
      current[i].x = pos[i][0];
      if (dims == 2) current[i].y = pos[i][1];
      current[i].t = t;
    }
    if (observe) observe(step, current);
  };

  // Start positions must be inside the grid and off the nodes.
  {
    const VelocityField& v = src.velocity_at(t0);
    for (const auto& p : pos) {
      const auto s = dims == 2 ? v.sample(p[0], p[1]) : v.sample(p[0]);
      if (!s) throw Error(ErrorCode::HitNode, "trajectory starts on a node");
    }
  }
  publish(0, t0);

  const std::vector<double> switches = src.switch_times();

  // One RK4 step over [a, b]; b may be a switch time, where the left limit applies.
  const auto stage = [&](const Point& p, double a, double b) {
    const bool edge = std::find(switches.begin(), switches.end(), b) != switches.end();
    return rk4(p, b - a, src.velocity_at(a), src.velocity_at(a + 0.5 * (b - a)),
               edge ? src.velocity_before(b) : src.velocity_at(b), dims);
  };

  for (std::size_t s = 0; s < steps; ++s) {
    const double ta = t0 + static_cast<double>(s) * dt;
    const double tb = t0 + static_cast<double>(s + 1) * dt;
    std::vector<double> cuts{ta};
    for (double w : switches) {
      if (w > ta && w < tb) cuts.push_back(w);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(tb);

    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double a = cuts[c];
      const double b = cuts[c + 1];
      for (auto& p : pos) {
        if (auto next = stage(p, a, b)) {
          p = *next;
          continue;
        }
        bool done = false;
        for (std::size_t k = 1; k <= opts.max_halvings && !done; ++k) {
          const std::size_t n = std::size_t{1} << k;
          const double hs = (b - a) / static_cast<double>(n);
          Point q = p;
          bool ok = true;
          for (std::size_t j = 0; j < n && ok; ++j) {
            const double u = a + static_cast<double>(j) * hs;
            const double w = j + 1 == n ? b : a + static_cast<double>(j + 1) * hs;
            if (const auto r = stage(q, u, w)) {
              q = *r;
            } else {
              ok = false;
            }
          }
          if (ok) {
            p = q;
            done = true;
          }
        }
        if (!done) {
          throw Error(ErrorCode::HitNode, "trajectory entered a node region at t=" +
                                              std::to_string(a) + " (x=" + std::to_string(p[0]) +
                                              ")");
        }
      }
    }
    src.release_before(tb);
    publish(s + 1, tb);
  }
  return current;
}

std::vector<Trajectory> integrate_trajectories(VelocitySource& src,
                                               std::span<const Configuration> starts, double dt,
                                               std::size_t steps, const IntegrationOptions& opts) {
  std::vector<Trajectory> out(starts.size());
  for (auto& tr : out) {
    tr.dt = dt;
    tr.samples.reserve(steps + 1);
  }
  integrate_ensemble(
      src, starts, dt, steps,
      [&](std::size_t, std::span<const Configuration> now) {
        for (std::size_t i = 0; i < now.size(); ++i) out[i].samples.push_back(now[i]);
      },
      opts);
  return out;
}

Trajectory integrate_trajectory(VelocitySource& src, const Configuration& start, double dt,
                                std::size_t steps, const IntegrationOptions& opts) {
  return integrate_trajectories(src, std::span(&start, 1), dt, steps, opts).front();
}

CrossingReport single_trajectory_no_crossing_check(std::span<const Trajectory> batch) {
  CrossingReport rep;
  rep.min_distance = std::numeric_limits<double>::infinity();
  if (batch.empty()) return rep;
  const std::size_t len = batch.front().samples.size();
  for (const auto& tr : batch) {
    if (tr.samples.size() != len) {
      throw Error(ErrorCode::MismatchedTimes, "trajectories have different lengths");
    }
  }
  const auto coord = [](const Configuration& c, int d) { return d == 0 ? c.x : c.y.value_or(0.0); };
  const int dims = len > 0 ? batch.front().samples.front().dims() : 1;
  for (std::size_t a = 0; a < batch.size(); ++a) {
    for (std::size_t b = a + 1; b < batch.size(); ++b) {
      bool swapped = false;
      for (std::size_t k = 0; k < len; ++k) {
        const auto& ca = batch[a].samples[k];
        const auto& cb = batch[b].samples[k];
        double d2 = 0.0;
        for (int d = 0; d < dims; ++d) {
          const double diff = coord(ca, d) - coord(cb, d);
          d2 += diff * diff;
        }
        rep.min_distance = std::min(rep.min_distance, std::sqrt(d2));
        if (k > 0 && !swapped) {
          const auto& pa = batch[a].samples[k - 1];
          const auto& pb = batch[b].samples[k - 1];
          for (int d = 0; d < dims; ++d) {
            const double before = coord(pa, d) - coord(pb, d);
            const double after = coord(ca, d) - coord(cb, d);
            if (before * after < 0.0) swapped = true;
          }
        }
      }
      if (swapped) rep.swapped_pairs.emplace_back(a, b);
    }
  }
  return rep;
}

}  // namespace pilotwave
