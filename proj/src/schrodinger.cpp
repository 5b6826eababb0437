#include "pilotwave/schrodinger.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "pilotwave/fft.hpp"

namespace pilotwave {

double Staircase::operator()(double x) const { return 2.0 * std::floor(x / delta) + 1.0; }

std::vector<double> staircase_A(const Grid1D& grid_x, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "staircase step must be positive");
  const Staircase s{delta};
  std::vector<double> a(grid_x.n());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = s(grid_x.coord(i));
  return a;
}

double Coupling::a_at(double x, const Grid1D& grid_x) const {
  if (shape) return (*shape)(x);
  return a.at(grid_x.nearest(x));
}

std::vector<double> Hamiltonian::switch_times() const {
  std::vector<double> out;
  if (!coupling) return out;
  if (std::isfinite(coupling->t_on)) out.push_back(coupling->t_on);
  if (std::isfinite(coupling->t_off)) out.push_back(coupling->t_off);
  return out;
}

Coupling staircase_coupling(const Grid1D& grid_x, double g, double delta) {
  Coupling c;
  c.g = g;
  c.a = staircase_A(grid_x, delta);
  c.shape = Staircase{delta};
  return c;
}

double default_dt(Method method, const WaveField& shape, const Hamiltonian& h) {
  const double dx = shape.x_axis().dx();
  if (method == Method::SplitOperator) {
    double dt = 0.1 * h.mass_x * dx * dx;
    if (shape.dims() == 2) {
      const double dy = shape.y_axis().dx();
      dt = std::min(dt, 0.1 * h.mass_y * dy * dy);
    }
    return dt;
  }
  double e_max = 2.0 / (h.mass_x * dx * dx);
  if (shape.dims() == 2) {
    const double dy = shape.y_axis().dx();
    e_max += 2.0 / (h.mass_y * dy * dy);
  }
  // Cayley phase 2 atan(E dt / 2) = E dt - (E dt)^3 / 12 + ...
  return std::cbrt(12.0 * 1e-3) / e_max;
}

namespace {

void check_hamiltonian(const Hamiltonian& h, const WaveField& shape) {
  if (!(h.mass_x > 0.0) || !(h.mass_y > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "masses must be positive");
  }
  if (!h.potential.empty() && h.potential.size() != shape.size()) {
    throw Error(ErrorCode::InvalidArgument, "potential sample count != grid size");
  }
  for (double u : h.potential) {
    if (!std::isfinite(u)) throw Error(ErrorCode::NonFinite, "potential has non-finite samples");
  }
  if (h.coupling) {
    if (shape.dims() != 2) throw Error(ErrorCode::InvalidArgument, "coupling needs a 2D field");
    if (h.coupling->a.size() != shape.nx()) {
      throw Error(ErrorCode::InvalidArgument, "A(x) sample count != nx");
    }
  }
}

void multiply(std::span<cplx> data, const std::vector<cplx>& phase) {
  for (std::size_t i = 0; i < data.size(); ++i) data[i] *= phase[i];
}

std::vector<cplx> potential_phase(const std::vector<double>& u, double tau) {
  std::vector<cplx> p(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) p[i] = std::polar(1.0, -u[i] * tau);
  return p;
}

// ---------------------------------------------------------------------------

class SplitOperatorPropagator final : public Propagator {
 public:
  SplitOperatorPropagator(const Hamiltonian& h, const WaveField& shape)
      : h_(h), nx_(shape.nx()), ny_(shape.ny()), kx_(shape.x_axis().wave_numbers()) {
    check_hamiltonian(h_, shape);
    shape.x_axis().require_spectral();
    if (shape.dims() == 2) {
      shape.y_axis().require_spectral();
      ky_ = shape.y_axis().wave_numbers();
    } else {
      ky_ = {0.0};
    }
  }

  void step(WaveField& f, double dt) override {
    const double t_mid = f.t() + 0.5 * dt;
    const bool kin = h_.kinetic_active(t_mid);
    const bool coup = h_.coupling_active(t_mid);
    const Phases& ph = phases(dt, kin, coup);
    auto v = f.values();

    if (!ph.potential_half.empty()) multiply(v, ph.potential_half);
    if (coup && kin) {
      fft(AxisFft::Axis::Y).forward(v);
      multiply(v, ph.coupling);
      fft(AxisFft::Axis::X).forward(v);
      multiply(v, ph.kinetic);
      fft(AxisFft::Axis::X).backward(v);
      multiply(v, ph.coupling);
      fft(AxisFft::Axis::Y).backward(v);
    } else if (coup) {
      fft(AxisFft::Axis::Y).forward(v);
      multiply(v, ph.coupling);
      fft(AxisFft::Axis::Y).backward(v);
    } else if (kin) {
      fft(AxisFft::Axis::Both).forward(v);
      multiply(v, ph.kinetic);
      fft(AxisFft::Axis::Both).backward(v);
    }
    if (!ph.potential_half.empty()) multiply(v, ph.potential_half);
    f.set_t(f.t() + dt);
  }

 private:
  struct Phases {
    double dt;
    bool kin;
    bool coup;
    std::vector<cplx> potential_half;
    std::vector<cplx> kinetic;
    std::vector<cplx> coupling;  // (x, k_y) representation; half step when kinetic is on
  };

  const AxisFft& fft(AxisFft::Axis axis) {
    auto& slot = ffts_[static_cast<int>(axis)];
    if (!slot) slot = std::make_unique<AxisFft>(nx_, ny_, axis);
    return *slot;
  }

  const Phases& phases(double dt, bool kin, bool coup) {
    for (const auto& p : cache_) {
      if (p.dt == dt && p.kin == kin && p.coup == coup) return p;
    }
    Phases p{dt, kin, coup, {}, {}, {}};
    if (!h_.potential.empty()) p.potential_half = potential_phase(h_.potential, 0.5 * dt);
    if (kin) {
      p.kinetic.resize(nx_ * ny_);
      for (std::size_t ix = 0; ix < nx_; ++ix) {
        const double ex = kx_[ix] * kx_[ix] / (2.0 * h_.mass_x);
        for (std::size_t iy = 0; iy < ny_; ++iy) {
          const double ey = ny_ > 1 ? ky_[iy] * ky_[iy] / (2.0 * h_.mass_y) : 0.0;
          p.kinetic[ix * ny_ + iy] = std::polar(1.0, -(ex + ey) * dt);
        }
      }
    }
    if (coup) {
      const double tau = kin ? 0.5 * dt : dt;
      const auto& c = *h_.coupling;
      p.coupling.resize(nx_ * ny_);
      for (std::size_t ix = 0; ix < nx_; ++ix) {
        const double shift = c.g * c.a[ix] * tau;
        for (std::size_t iy = 0; iy < ny_; ++iy) {
          p.coupling[ix * ny_ + iy] = std::polar(1.0, -ky_[iy] * shift);
        }
      }
    }
    if (cache_.size() >= 6) cache_.pop_front();
    cache_.push_back(std::move(p));
    return cache_.back();
  }

  Hamiltonian h_;
  std::size_t nx_;
  std::size_t ny_;
  std::vector<double> kx_;
  std::vector<double> ky_;
  std::unique_ptr<AxisFft> ffts_[3];
  std::deque<Phases> cache_;
};

// ---------------------------------------------------------------------------

// Solves (1 + i tau H) out = (1 - i tau H) in for a Hermitian tridiagonal H
// with constant diagonal d, superdiagonal up and subdiagonal lo = conj(up),
// Dirichlet ends. `work` must hold 2n entries.
void cayley_tridiagonal(std::span<cplx> x, double d, cplx up, double tau, std::vector<cplx>& work) {
  const std::size_t n = x.size();
  const cplx lo = std::conj(up);
  const cplx i_tau(0.0, tau);
  cplx* rhs = work.data();
  cplx* c_prime = work.data() + n;

  for (std::size_t j = 0; j < n; ++j) {
    cplx hx = d * x[j];
    if (j + 1 < n) hx += up * x[j + 1];
    if (j > 0) hx += lo * x[j - 1];
    rhs[j] = x[j] - i_tau * hx;
  }
  const cplx diag = 1.0 + i_tau * d;
  const cplx a_up = i_tau * up;
  const cplx a_lo = i_tau * lo;

  // Thomas algorithm.
  cplx denom = diag;
  c_prime[0] = a_up / denom;
  rhs[0] /= denom;
  for (std::size_t j = 1; j < n; ++j) {
    denom = diag - a_lo * c_prime[j - 1];
    c_prime[j] = a_up / denom;
    rhs[j] = (rhs[j] - a_lo * rhs[j - 1]) / denom;
  }
  x[n - 1] = rhs[n - 1];
  for (std::size_t j = n - 1; j-- > 0;) x[j] = rhs[j] - c_prime[j] * x[j + 1];
}

class CrankNicolsonPropagator final : public Propagator {
 public:
  CrankNicolsonPropagator(const Hamiltonian& h, const WaveField& shape)
      : h_(h), nx_(shape.nx()), ny_(shape.ny()), dx_(shape.x_axis().dx()) {
    check_hamiltonian(h_, shape);
    dy_ = shape.dims() == 2 ? shape.y_axis().dx() : 1.0;
    line_.resize(std::max(nx_, ny_));
    work_.resize(2 * std::max(nx_, ny_));
  }

  void step(WaveField& f, double dt) override {
    const double t_mid = f.t() + 0.5 * dt;
    const bool kin = h_.kinetic_active(t_mid);
    const bool coup = h_.coupling_active(t_mid);
    auto v = f.values();

    std::vector<cplx> pot;
    if (!h_.potential.empty()) {
      pot = potential_phase(h_.potential, 0.5 * dt);
      multiply(v, pot);
    }
    if (ny_ == 1) {
      if (kin) sweep_x(v, dt);
    } else {
      if (kin) sweep_x(v, 0.5 * dt);
      if (kin || coup) sweep_y(v, dt, kin, coup);
      if (kin) sweep_x(v, 0.5 * dt);
    }
    if (!pot.empty()) multiply(v, pot);
    f.set_t(f.t() + dt);
  }

 private:
  void sweep_x(std::span<cplx> v, double dt) {
    const double d = 1.0 / (h_.mass_x * dx_ * dx_);
    const cplx up(-0.5 * d, 0.0);
    std::span<cplx> line(line_.data(), nx_);
    for (std::size_t iy = 0; iy < ny_; ++iy) {
      for (std::size_t ix = 0; ix < nx_; ++ix) line[ix] = v[ix * ny_ + iy];
      cayley_tridiagonal(line, d, up, 0.5 * dt, work_);
      for (std::size_t ix = 0; ix < nx_; ++ix) v[ix * ny_ + iy] = line[ix];
    }
  }

  void sweep_y(std::span<cplx> v, double dt, bool kin, bool coup) {
    const double d = kin ? 1.0 / (h_.mass_y * dy_ * dy_) : 0.0;
    for (std::size_t ix = 0; ix < nx_; ++ix) {
      // -i g A d/dy with a centered difference.
      const double drift = coup ? h_.coupling->g * h_.coupling->a[ix] : 0.0;
      const cplx up(-0.5 * d, -drift / (2.0 * dy_));
      cayley_tridiagonal(v.subspan(ix * ny_, ny_), d, up, 0.5 * dt, work_);
    }
  }

  Hamiltonian h_;
  std::size_t nx_;
  std::size_t ny_;
  double dx_;
  double dy_;
  std::vector<cplx> line_;
  std::vector<cplx> work_;
};

}  // namespace

std::unique_ptr<Propagator> make_propagator(const Hamiltonian& h, const WaveField& shape, Method m) {
  if (m == Method::SplitOperator) return std::make_unique<SplitOperatorPropagator>(h, shape);
  return std::make_unique<CrankNicolsonPropagator>(h, shape);
}

void advance(Propagator& prop, const Hamiltonian& h, WaveField& f, double t_target) {
  double t = f.t();
  if (h.coupling) {
    for (double e : {h.coupling->t_on, h.coupling->t_off}) {
      if ((e > t && e < t_target) || (e < t && e > t_target)) {
        prop.step(f, e - t);
        t = e;
      }
    }
  }
  prop.step(f, t_target - t);
  f.set_t(t_target);
}

WaveField split_step(const WaveField& f, const Hamiltonian& h, double dt) {
  WaveField out = f;
  SplitOperatorPropagator(h, f).step(out, dt);
  return out;
}

WaveField cn_step(const WaveField& f, const Hamiltonian& h, double dt) {
  WaveField out = f;
  CrankNicolsonPropagator(h, f).step(out, dt);
  return out;
}

// ---------------------------------------------------------------------------

StepMonitor::StepMonitor(const WaveField& initial, double boundary_limit, double drift_limit)
    : band_(default_boundary_band(initial.x_axis())),
      boundary_limit_(boundary_limit),
      drift_limit_(drift_limit),
      initial_norm2_(initial.norm_squared()),
      last_norm2_(initial_norm2_) {
  if (initial.dims() == 2) band_ = std::min(band_, default_boundary_band(initial.y_axis()));
  const double b = boundary_mass(initial, band_);
  if (b > boundary_limit_) {
    throw Error(ErrorCode::BoundaryMassExceeded,
                "initial boundary mass " + std::to_string(b) + " exceeds limit");
  }
}

void StepMonitor::check(const WaveField& f) {
  const double n2 = f.norm_squared();
  if (!std::isfinite(n2)) throw Error(ErrorCode::NonFinite, "norm became non-finite");
  const double step_drift = std::abs(n2 - last_norm2_);
  if (step_drift > drift_limit_) {
    throw Error(ErrorCode::NonUnitaryStep,
                "norm drift " + std::to_string(step_drift) + " in one step at t=" +
                    std::to_string(f.t()));
  }
  last_norm2_ = n2;
  max_drift_ = std::max(max_drift_, std::abs(n2 - initial_norm2_));
  const double b = boundary_mass(f, band_);
  if (b > boundary_limit_) {
    throw Error(ErrorCode::BoundaryMassExceeded,
                "boundary mass " + std::to_string(b) + " at t=" + std::to_string(f.t()));
  }
}

EvolutionResult evolve(const WaveField& f, const Hamiltonian& h, const EvolutionParams& p,
                       const SnapshotCallback& on_snapshot) {
  if (!(p.dt > 0.0) || p.steps < 1) {
    throw Error(ErrorCode::InvalidArgument, "evolution needs dt > 0 and steps >= 1");
  }
  if (std::abs(f.norm_squared() - 1.0) > 1e-6) {
    throw Error(ErrorCode::InvalidArgument, "evolve expects a normalized field");
  }
  auto prop = make_propagator(h, f, p.method);
  StepMonitor monitor(f);
  EvolutionResult out{f, {}, 0.0};
  WaveField& cur = out.final_field;

  const auto emit = [&](std::size_t step) {
    if (p.snapshot_stride > 0) out.snapshots.push_back(cur);
    if (on_snapshot) on_snapshot(cur, step);
  };
  emit(0);
  const double t0 = f.t();
  for (std::size_t s = 1; s <= p.steps; ++s) {
    advance(*prop, h, cur, t0 + static_cast<double>(s) * p.dt);
    monitor.check(cur);
    const bool last = s == p.steps;
    if (last || (p.snapshot_stride > 0 && s % p.snapshot_stride == 0)) emit(s);
  }
  out.max_norm_drift = monitor.max_drift();
  return out;
}

// ---------------------------------------------------------------------------

WaveField translate_y(const WaveField& f, double d) {
  const std::size_t nx = f.nx();
  const std::size_t ny = f.ny();
  const auto ky = f.y_axis().wave_numbers();
  WaveField out = f;
  auto v = out.values();
  AxisFft fft(nx, ny, AxisFft::Axis::Y);
  fft.forward(v);
  for (std::size_t ix = 0; ix < nx; ++ix) {
    for (std::size_t iy = 0; iy < ny; ++iy) v[ix * ny + iy] *= std::polar(1.0, -ky[iy] * d);
  }
  fft.backward(v);
  return out;
}

WaveField apply_pointer_splitter(const WaveField& f, const std::vector<double>& displacements,
                                 const std::vector<double>& weights) {
  if (f.dims() != 2) throw Error(ErrorCode::InvalidArgument, "splitter acts on 2D fields");
  if (displacements.empty() || displacements.size() != weights.size()) {
    throw Error(ErrorCode::InvalidArgument, "splitter needs one weight per displacement");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw Error(ErrorCode::InvalidArgument, "splitter weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "splitter weights must sum to 1");
  }
  std::vector<cplx> acc(f.size(), cplx{});
  for (std::size_t k = 0; k < displacements.size(); ++k) {
    const WaveField copy = translate_y(f, displacements[k]);
    const double amp = std::sqrt(weights[k]);
    const auto v = copy.values();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += amp * v[i];
  }
  return normalize(WaveField(f.grid2d(), std::move(acc), f.t()));
}

}  // namespace pilotwave
