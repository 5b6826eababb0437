#pragma once

// Guidance velocities and trajectory integration.
//
// The velocity of a configuration is the probability current of the active
// Hamiltonian divided by the density. For the kinetic terms this is
// (1/m) Im(d psi/dx / psi); while the pointer coupling g A(x) p_y is active it
// adds the drift g A(x) along y (its dH/dp_y). In impulsive mode only the
// drift remains.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pilotwave/core.hpp"
#include "pilotwave/schrodinger.hpp"

namespace pilotwave {

inline constexpr double kNodeEpsilon = 1e-12;

/// Which terms of a piecewise-in-time Hamiltonian apply at a switch time:
/// those starting there (After) or those ending there (Before).
enum class Side { After, Before };

class VelocityField {
 public:
  /// Velocity components at grid point (ix, iy), kinetic part plus drift sampled on the grid.
  double vx(std::size_t ix, std::size_t iy = 0) const;
  double vy(std::size_t ix, std::size_t iy = 0) const;
  bool masked(std::size_t ix, std::size_t iy = 0) const { return mask_[ix * ny_ + iy] != 0; }

  int dims() const { return y_ ? 2 : 1; }
  double t() const { return t_; }
  const Grid1D& x_axis() const { return x_; }
  bool has_kinetic() const { return !kin_x_.empty(); }
  bool has_drift() const { return drift_.has_value(); }
  std::size_t masked_count() const;

  /// Velocity at an arbitrary point: (bi)linear interpolation of the kinetic
  /// part plus the exact drift g A(x). Returns nullopt when an interpolation
  /// corner is masked. Throws LeftGrid outside the grid.
  std::optional<std::array<double, 2>> sample(double x, double y = 0.0) const;

  /// (1 - a) * lo + a * hi, masks united. Fields must share grid and terms.
  static VelocityField blend(const VelocityField& lo, const VelocityField& hi, double a, double t);

 private:
  friend VelocityField velocity_from_field(const WaveField&, const Hamiltonian&, double, Side);
  friend class SnapshotHistory;

  Grid1D x_{8, 0.0, 1.0};
  std::optional<Grid1D> y_;
  std::size_t ny_ = 1;
  double t_ = 0.0;
  std::vector<double> kin_x_;
  std::vector<double> kin_y_;
  std::vector<std::uint8_t> mask_;
  std::optional<Coupling> drift_;
};

/// Guidance velocity of f under the terms of h active at f.t(); the default
/// Hamiltonian is the free one with unit masses. Points with
/// |f|^2 < node_epsilon * max |f|^2 are masked. Throws AllNodes if every point is.
VelocityField velocity_from_field(const WaveField& f, const Hamiltonian& h = {},
                                  double node_epsilon = kNodeEpsilon, Side side = Side::After);

/// Provides velocity fields at requested times. References stay valid until
/// release_before() drops them.
class VelocitySource {
 public:
  virtual ~VelocitySource() = default;
  virtual const VelocityField& velocity_at(double t) = 0;
  /// Left limit in time; differs from velocity_at only at switch times.
  virtual const VelocityField& velocity_before(double t) { return velocity_at(t); }
  /// Times where the velocity jumps; integration steps are split there.
  virtual std::vector<double> switch_times() const { return {}; }
  virtual void release_before(double /*t*/) {}
};

/// Stored snapshots; velocities are linearly interpolated in time between them.
class SnapshotHistory final : public VelocitySource {
 public:
  SnapshotHistory(std::vector<WaveField> snapshots, Hamiltonian h);
  const VelocityField& velocity_at(double t) override { return velocity(t, Side::After); }
  const VelocityField& velocity_before(double t) override { return velocity(t, Side::Before); }
  std::vector<double> switch_times() const override { return h_.switch_times(); }
  void release_before(double t) override;

 private:
  const VelocityField& velocity(double t, Side side);

  std::vector<WaveField> snapshots_;
  Hamiltonian h_;
  std::map<std::pair<std::size_t, Side>, VelocityField> at_snapshot_;
  std::map<std::pair<double, Side>, VelocityField> blended_;
};

/// Source that can produce the exact field at any requested time.
class FieldSource : public VelocitySource {
 public:
  explicit FieldSource(Hamiltonian h) : h_(std::move(h)) {}
  const VelocityField& velocity_at(double t) override;
  const VelocityField& velocity_before(double t) override;
  std::vector<double> switch_times() const override { return h_.switch_times(); }
  void release_before(double t) override;
  virtual const WaveField& field_at(double t) = 0;
  const Hamiltonian& hamiltonian() const { return h_; }

 protected:
  Hamiltonian h_;
  std::map<double, VelocityField> velocities_;
  std::map<double, VelocityField> before_;
};

/// Evaluates a user-supplied field function (e.g. an analytic solution).
class FieldFunctionSource final : public FieldSource {
 public:
  FieldFunctionSource(std::function<WaveField(double)> fn, Hamiltonian h = {});
  const WaveField& field_at(double t) override;
  void release_before(double t) override;

 private:
  std::function<WaveField(double)> fn_;
  std::map<double, WaveField> fields_;
};

/// Evolves the wave field forward on demand; requested times must not precede
/// the oldest retained field. Each request is reached from the latest cached
/// field at or before it in equal substeps no longer than max_dt.
class OnTheFlyEvolver final : public FieldSource {
 public:
  OnTheFlyEvolver(WaveField initial, Hamiltonian h, Method method, double max_dt);
  const WaveField& field_at(double t) override;
  void release_before(double t) override;
  double max_norm_drift() const { return monitor_.max_drift(); }

 private:
  std::unique_ptr<Propagator> prop_;
  double max_dt_;
  StepMonitor monitor_;
  std::map<double, WaveField> fields_;
};

struct IntegrationOptions {
  std::size_t max_halvings = 8;
};

using StepObserver = std::function<void(std::size_t step, std::span<const Configuration>)>;

/// Classical 4th-order Runge-Kutta integration of dX/dt = v(X, t) for a batch
/// of configurations in lockstep. The observer is called for step 0 and after
/// every step. Steps are split at the source's switch times. A step that
/// touches a masked region is retried with up to max_halvings successive
/// halvings of the step, then HitNode is thrown. Leaving the grid throws LeftGrid.
std::vector<Configuration> integrate_ensemble(VelocitySource& src,
                                              std::span<const Configuration> starts, double dt,
                                              std::size_t steps, const StepObserver& observe = {},
                                              const IntegrationOptions& opts = {});

Trajectory integrate_trajectory(VelocitySource& src, const Configuration& start, double dt,
                                std::size_t steps, const IntegrationOptions& opts = {});

std::vector<Trajectory> integrate_trajectories(VelocitySource& src,
                                               std::span<const Configuration> starts, double dt,
                                               std::size_t steps,
                                               const IntegrationOptions& opts = {});

struct CrossingReport {
  double min_distance = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> swapped_pairs;
  bool ok() const { return swapped_pairs.empty(); }
};

/// Minimum pairwise distance at equal times, and every pair whose order in
/// some coordinate flips between consecutive samples.
CrossingReport single_trajectory_no_crossing_check(std::span<const Trajectory> batch);

}  // namespace pilotwave
