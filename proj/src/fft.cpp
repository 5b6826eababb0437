#include "pilotwave/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <utility>

namespace pilotwave {

namespace {

// The FFTW planner is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_plan make_plan(std::size_t nx, std::size_t ny, AxisFft::Axis axis, int sign, fftw_complex* buf) {
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  const int inx = static_cast<int>(nx);
  const int iny = static_cast<int>(ny);
  switch (axis) {
    case AxisFft::Axis::Both:
      if (ny == 1) return fftw_plan_dft_1d(inx, buf, buf, sign, flags);
      return fftw_plan_dft_2d(inx, iny, buf, buf, sign, flags);
    case AxisFft::Axis::Y: {
      int n[] = {iny};
      return fftw_plan_many_dft(1, n, inx, buf, nullptr, 1, iny, buf, nullptr, 1, iny, sign, flags);
    }
    case AxisFft::Axis::X: {
      int n[] = {inx};
      return fftw_plan_many_dft(1, n, iny, buf, nullptr, iny, 1, buf, nullptr, iny, 1, sign, flags);
    }
  }
  return nullptr;
}

}  // namespace

AxisFft::AxisFft(std::size_t nx, std::size_t ny, Axis axis) : size_(nx * ny) {
  std::size_t n = size_;
  if (axis == Axis::X) n = nx;
  if (axis == Axis::Y) n = ny;
  scale_ = 1.0 / static_cast<double>(n);

  std::lock_guard lock(planner_mutex());
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * size_));
  forward_ = make_plan(nx, ny, axis, FFTW_FORWARD, buf);
  backward_ = make_plan(nx, ny, axis, FFTW_BACKWARD, buf);
  fftw_free(buf);
  if (!forward_ || !backward_) throw Error(ErrorCode::InvalidArgument, "FFTW failed to plan");
}

AxisFft::~AxisFft() {
  std::lock_guard lock(planner_mutex());
  if (forward_) fftw_destroy_plan(static_cast<fftw_plan>(forward_));
  if (backward_) fftw_destroy_plan(static_cast<fftw_plan>(backward_));
}

AxisFft::AxisFft(AxisFft&& other) noexcept
    : forward_(std::exchange(other.forward_, nullptr)),
      backward_(std::exchange(other.backward_, nullptr)),
      size_(other.size_),
      scale_(other.scale_) {}

AxisFft& AxisFft::operator=(AxisFft&& other) noexcept {
  std::swap(forward_, other.forward_);
  std::swap(backward_, other.backward_);
  size_ = other.size_;
  scale_ = other.scale_;
  return *this;
}

void AxisFft::forward(std::span<cplx> data) const {
  if (data.size() != size_) throw Error(ErrorCode::InvalidArgument, "FFT size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(forward_), p, p);
}

void AxisFft::backward(std::span<cplx> data) const {
  if (data.size() != size_) throw Error(ErrorCode::InvalidArgument, "FFT size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(backward_), p, p);
  for (auto& z : data) z *= scale_;
}

}  // namespace pilotwave
