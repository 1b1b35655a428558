#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace eprlock {

/// Real-to-complex FFT of fixed length backed by FFTW. Owns aligned buffers
/// and both plans; not copyable. Separate instances may be used from
/// different threads.
class RealFft {
 public:
  explicit RealFft(std::size_t length);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t length() const;
  std::size_t bins() const { return length() / 2 + 1; }

  /// Time-domain working buffer (length samples).
  std::span<double> real();
  /// Frequency-domain working buffer (bins() complex values, interleaved re/im).
  std::span<double> spectrum();

  /// real() -> spectrum(). Unnormalized.
  void forward();
  /// spectrum() -> real(). Unnormalized: forward then inverse scales by length.
  void inverse();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace eprlock
