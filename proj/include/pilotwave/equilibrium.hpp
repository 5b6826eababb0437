#pragma once

// Quantum-equilibrium sampling and the statistical checks built on it:
// equivariance of |psi|^2 and the conditional probability formula.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pilotwave/conditional.hpp"
#include "pilotwave/core.hpp"

namespace pilotwave {

/// How a sampled density is continued between grid points.
///  Cells:  constant on the cell owned by each point, [x_i - dx/2, x_i + dx/2]
///          clipped to the grid; the CDF is piecewise linear.
///  Linear: linear between neighbouring points; the CDF is piecewise quadratic.
enum class Interp { Cells, Linear };

class CellCdf {
 public:
  CellCdf(const Grid1D& grid, std::span<const double> density, Interp interp = Interp::Cells);

  double cdf(double x) const;
  /// Inverse CDF for u in [0, 1].
  double quantile(double u) const;
  /// Index of the grid point whose cell owns x (after clipping to the grid).
  std::size_t cell_of(double x) const;
  double total() const { return cum_.back(); }
  Interp interp() const { return interp_; }

 private:
  std::size_t segment(double x) const;

  Interp interp_;
  double dx_;
  std::vector<double> edges_;  // Cells: n + 1 cell edges; Linear: the n grid points
  std::vector<double> cum_;    // CDF at edges_, ending at 1
  std::vector<double> rho_;    // Linear: density at the points, normalized like cum_
};

struct EnsembleSpec {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  WaveField source;
};

/// Inverse-CDF sampling of |source|^2: x from the x-marginal, then y from the
/// row of the cell X falls in. Deterministic in (seed, source).
std::vector<Configuration> sample_configurations(const EnsembleSpec& spec);

struct StatReport {
  std::string test;
  std::string label;  // axis / window description
  double t = 0.0;
  double statistic = 0.0;
  double critical = 0.0;
  bool pass = false;
  std::size_t n = 0;
};

inline constexpr double kKsCoefficient1pct = 1.63;

double ks_critical(std::size_t n);

/// Two-sided one-sample KS distance sup |F_n - F|.
double ks_statistic(std::vector<double> samples, const CellCdf& model);

StatReport ks_report(std::string test, std::string label, std::span<const double> samples,
                     const CellCdf& model);

/// Pearson chi-square over equiprobable model bins, critical value at the 1% level.
StatReport chi_square_report(std::string test, std::string label, std::span<const double> samples,
                             const CellCdf& model, std::size_t bins = 0);

/// Marginal CDF. The pointer axis (y) is continued linearly: the coupling moves
/// it by off-grid translations. Along x the staircase jumps sit on cell edges,
/// so x keeps the cell model.
CellCdf marginal_cdf(const WaveField& f, Axis axis);

/// KS of the endpoint marginal along `axis` against the |field|^2 marginal.
/// Throws MismatchedTimes if the endpoint times differ from field.t().
StatReport check_equivariance(std::span<const Configuration> endpoints, const WaveField& field,
                              Axis axis);
/// One report per axis of the field.
std::vector<StatReport> check_equivariance(std::span<const Configuration> endpoints,
                                           const WaveField& field);
/// Binned chi-square version of the same comparison.
StatReport check_equivariance_chi2(std::span<const Configuration> endpoints, const WaveField& field,
                                   Axis axis);

inline constexpr std::size_t kMinSelected = 200;

/// X of the endpoints whose Y lies in [y_lo, y_hi] against the conditional
/// slice density at the window centre. Throws TooFewSelected.
StatReport check_conditional_probability(const WaveField& field,
                                         std::span<const Configuration> endpoints, double y_lo,
                                         double y_hi, std::size_t min_selected = kMinSelected);
StatReport check_conditional_probability_chi2(const WaveField& field,
                                              std::span<const Configuration> endpoints,
                                              double y_lo, double y_hi,
                                              std::size_t min_selected = kMinSelected);

/// Moves each Y through an x-independent unitary on the pointer axis using
/// the order-preserving map between the conditional y-distributions of the
/// column owning X before and after. This is the only map a one-dimensional
/// guidance flow can induce.
void transport_pointer(std::span<Configuration> ensemble, const WaveField& before,
                       const WaveField& after);

}  // namespace pilotwave
