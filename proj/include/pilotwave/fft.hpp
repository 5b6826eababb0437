#pragma once

#include <cstddef>
#include <span>

#include "pilotwave/core.hpp"

namespace pilotwave {

/// In-place FFTs of an x-major nx-by-ny array along one or both axes.
///
/// Plans are built with FFTW_ESTIMATE so that the chosen algorithm, and hence
/// every output bit, is independent of timing measurements.
class AxisFft {
 public:
  enum class Axis { X, Y, Both };

  AxisFft(std::size_t nx, std::size_t ny, Axis axis);
  ~AxisFft();
  AxisFft(const AxisFft&) = delete;
  AxisFft& operator=(const AxisFft&) = delete;
  AxisFft(AxisFft&& other) noexcept;
  AxisFft& operator=(AxisFft&& other) noexcept;

  void forward(std::span<cplx> data) const;
  /// Inverse transform including the 1/n normalization.
  void backward(std::span<cplx> data) const;

 private:
  void* forward_ = nullptr;
  void* backward_ = nullptr;
  std::size_t size_ = 0;
  double scale_ = 1.0;
};

}  // namespace pilotwave
