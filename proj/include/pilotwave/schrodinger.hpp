#pragma once

// Unitary time evolution of wave fields.
//
// The Hamiltonian is
//
//   H = p_x^2 / (2 m_x) + p_y^2 / (2 m_y) + U(x, y) + g A(x) p_y,
//
// with p = -i d/dx (hbar = 1). The coupling is optional and may be restricted
// to a time window [t_on, t_off). In impulsive mode the kinetic terms are
// frozen while the coupling is active, so the window evolution is a pure
// x-dependent translation of the pointer axis by g A(x) t.

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "pilotwave/core.hpp"

namespace pilotwave {

/// A(x) = 2 floor(x / delta) + 1: odd integers, constant on [p delta, (p+1) delta).
struct Staircase {
  double delta;
  double operator()(double x) const;
};

/// Samples the staircase on every grid point. Throws InvalidArgument if delta <= 0.
std::vector<double> staircase_A(const Grid1D& grid_x, double delta);

struct Coupling {
  double g = 0.0;                  // scaled velocity
  std::vector<double> a;           // A(x) on the x grid
  std::optional<Staircase> shape;  // exact A(x) when built from the staircase
  double t_on = -std::numeric_limits<double>::infinity();
  double t_off = std::numeric_limits<double>::infinity();
  bool impulsive = true;

  bool active_at(double t) const { return t >= t_on && t < t_off; }
  /// A at an arbitrary x: the exact staircase if known, otherwise the owning grid cell.
  double a_at(double x, const Grid1D& grid_x) const;
};

Coupling staircase_coupling(const Grid1D& grid_x, double g, double delta);

struct Hamiltonian {
  double mass_x = 1.0;
  double mass_y = 1.0;
  std::vector<double> potential;  // nx*ny samples (x-major); empty means U = 0
  std::optional<Coupling> coupling;

  bool coupling_active(double t) const { return coupling && coupling->active_at(t); }
  bool kinetic_active(double t) const { return !(coupling_active(t) && coupling->impulsive); }
  /// Terms in force just before t (left limit at the window edges).
  bool coupling_active_before(double t) const {
    return coupling && t > coupling->t_on && t <= coupling->t_off;
  }
  bool kinetic_active_before(double t) const {
    return !(coupling_active_before(t) && coupling->impulsive);
  }
  /// Finite window edges, where the velocity field jumps.
  std::vector<double> switch_times() const;
};

enum class Method { SplitOperator, CrankNicolson };

struct EvolutionParams {
  double dt = 0.0;
  std::size_t steps = 0;
  Method method = Method::SplitOperator;
  std::size_t snapshot_stride = 0;  // 0: no intermediate snapshots
};

/// Default time step: split-operator 0.1 m dx^2; Crank-Nicolson sized so the
/// Cayley phase error of the fastest grid mode stays below 1e-3 per step.
double default_dt(Method method, const WaveField& shape, const Hamiltonian& h);

/// One-step propagator bound to a grid and Hamiltonian. Each step uses the
/// Hamiltonian terms active at the step midpoint.
class Propagator {
 public:
  virtual ~Propagator() = default;
  /// Advances f by dt (dt may be negative: the adjoint step).
  virtual void step(WaveField& f, double dt) = 0;
};

std::unique_ptr<Propagator> make_propagator(const Hamiltonian& h, const WaveField& shape, Method m);

/// Advances f to t_target in one step, split at any coupling window edge in between.
void advance(Propagator& prop, const Hamiltonian& h, WaveField& f, double t_target);

/// Single steps, exposed for testing.
WaveField split_step(const WaveField& f, const Hamiltonian& h, double dt);
WaveField cn_step(const WaveField& f, const Hamiltonian& h, double dt);

/// Per-step guard: aborts on boundary mass above 1e-6 or norm drift above 1e-6.
class StepMonitor {
 public:
  explicit StepMonitor(const WaveField& initial, double boundary_limit = 1e-6,
                       double drift_limit = 1e-6);
  /// Throws BoundaryMassExceeded or NonUnitaryStep.
  void check(const WaveField& f);
  double max_drift() const { return max_drift_; }
  double initial_norm_squared() const { return initial_norm2_; }

 private:
  std::size_t band_;
  double boundary_limit_;
  double drift_limit_;
  double initial_norm2_;
  double last_norm2_;
  double max_drift_ = 0.0;
};

struct EvolutionResult {
  WaveField final_field;
  std::vector<WaveField> snapshots;  // step 0, every snapshot_stride steps, and the last step
  double max_norm_drift = 0.0;       // max |norm^2(t) - norm^2(0)|
};

using SnapshotCallback = std::function<void(const WaveField&, std::size_t step)>;

/// Evolves f for p.steps steps. Steps that straddle a coupling window edge are
/// split at the edge. Throws BoundaryMassExceeded / NonUnitaryStep.
EvolutionResult evolve(const WaveField& f, const Hamiltonian& h, const EvolutionParams& p,
                       const SnapshotCallback& on_snapshot = {});

/// psi(x, y) -> psi(x, y - d), spectrally exact on the periodic y grid.
WaveField translate_y(const WaveField& f, double d);

/// Instantaneous x-independent pointer splitter: psi(x, y) -> sum_k sqrt(w_k) psi(x, y - d_k),
/// renormalized. Displacements must be pairwise separated so the copies are orthogonal.
WaveField apply_pointer_splitter(const WaveField& f, const std::vector<double>& displacements,
                                 const std::vector<double>& weights);

}  // namespace pilotwave
