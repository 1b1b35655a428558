#include "eprlock/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "eprlock/errors.hpp"

namespace eprlock {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct RealFft::Impl {
  std::size_t n = 0;
  double* time = nullptr;
  fftw_complex* freq = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
    fftw_free(time);
    fftw_free(freq);
  }
};

RealFft::RealFft(std::size_t length) : impl_(std::make_unique<Impl>()) {
  if (length < 2) throw InvalidInput("FFT length must be >= 2");
  impl_->n = length;
  impl_->time = fftw_alloc_real(length);
  impl_->freq = fftw_alloc_complex(length / 2 + 1);
  if (!impl_->time || !impl_->freq) throw NumericalError("FFT buffer allocation failed");
  std::lock_guard lock(planner_mutex());
  const int n = static_cast<int>(length);
  impl_->forward = fftw_plan_dft_r2c_1d(n, impl_->time, impl_->freq, FFTW_ESTIMATE);
  impl_->inverse = fftw_plan_dft_c2r_1d(n, impl_->freq, impl_->time, FFTW_ESTIMATE);
  if (!impl_->forward || !impl_->inverse) throw NumericalError("FFTW planning failed");
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

std::size_t RealFft::length() const { return impl_->n; }

std::span<double> RealFft::real() { return {impl_->time, impl_->n}; }

std::span<double> RealFft::spectrum() { return {reinterpret_cast<double*>(impl_->freq), 2 * bins()}; }

void RealFft::forward() { fftw_execute(impl_->forward); }

// c2r destroys its input; callers treat spectrum() as scratch afterwards.
void RealFft::inverse() { fftw_execute(impl_->inverse); }

}  // namespace eprlock
