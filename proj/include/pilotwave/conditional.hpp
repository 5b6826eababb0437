#pragma once

// Conditional and effective wave functions of the system axis x given the
// pointer position y, pointer channels, and the G + iJ residual diagnostic.

#include <cstdint>
#include <optional>
#include <vector>

#include "pilotwave/core.hpp"

namespace pilotwave {

enum class Axis { X, Y };

/// Marginal density along one axis: rho_i = sum_j |f_ij|^2 dy for Axis::X.
/// For 1D fields Axis::X is |f_i|^2.
std::vector<double> marginal_density(const WaveField& f, Axis axis);

/// x-row of a 2D field at pointer position y (linear interpolation between
/// adjacent rows), renormalized. Throws ZeroNorm on a node of y.
WaveField conditional_slice(const WaveField& joint, double y);

struct Channel {
  double y_lo = 0.0;
  double y_hi = 0.0;
  double weight = 0.0;
  double centroid = 0.0;

  bool contains(double y) const { return y >= y_lo && y <= y_hi; }
  double width() const { return y_hi - y_lo; }
};

inline constexpr double kDefaultChannelThreshold = 1e-4;

/// Contiguous y-intervals where the y-marginal exceeds threshold * max.
/// Windows closer than min_gap are merged. threshold must lie in (1e-12, 1e-2).
/// Throws NoChannels if the marginal vanishes.
std::vector<Channel> detect_channels(const WaveField& joint,
                                     double threshold = kDefaultChannelThreshold,
                                     double min_gap = 0.0);

struct EffectiveReport {
  bool exists = false;
  std::optional<Channel> channel;
};

/// The effective wave function exists when y lies inside exactly one channel.
EffectiveReport effective_exists(const WaveField& joint, double y,
                                 double threshold = kDefaultChannelThreshold,
                                 double min_gap = 0.0);

struct GjResidual {
  Grid1D grid;
  std::vector<cplx> raw;      // (i d/dt + (1/2m) d2/dx2 - U) psi / psi
  std::vector<std::uint8_t> mask;  // 1 where not evaluated
  cplx gauge;                 // |psi|^2-weighted mean of raw: the x-independent part

  /// raw minus the gauge constant (zero at masked points).
  std::vector<cplx> reduced() const;
  /// max |reduced| over points between the (1-f)/2 and (1+f)/2 mass quantiles of |psi|^2.
  double max_reduced_in_bulk(const WaveField& psi, double fraction = 0.9) const;
  std::size_t evaluated() const;
};

/// Residual of three consecutive conditional slices spaced dt apart. Slices
/// may carry arbitrary normalization and phase; both are x-independent and
/// end up in the gauge constant. Points where any slice is below
/// node_epsilon * max density, and the two edge points, are masked.
/// Throws HitNode if nothing can be evaluated.
GjResidual gj_residual(const WaveField& prev, const WaveField& cur, const WaveField& next,
                       double dt, const std::vector<double>& potential_row = {},
                       double mass = 1.0, double node_epsilon = 1e-12);

}  // namespace pilotwave
