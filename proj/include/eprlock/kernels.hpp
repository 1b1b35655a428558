#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation; AVX2/FMA and NEON variants are compiled where the toolchain
// supports them and selected at runtime. Setting EPRLOCK_KERNELS=scalar in the
// environment forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace eprlock::kernels {

struct KernelTable {
  std::string_view name;

  // out[k] = (omega[k]^2 + top) / (omega[k]^2 + bottom)
  void (*rational_variance)(const double* omega, double* out, std::size_t n, double top, double bottom);
  // out[k] = a[k] * b[k]
  void (*multiply)(const double* a, const double* b, double* out, std::size_t n);
  // out[k] = alpha * x[k] + beta * y[k]
  void (*axpby)(double alpha, const double* x, double beta, const double* y, double* out, std::size_t n);
  // out[k] = x[k] * c[k] + p[k] * s[k]
  void (*rotate)(const double* x, const double* p, const double* c, const double* s, double* out,
                 std::size_t n);
  // acc[k] += re^2 + im^2 for interleaved complex input of n bins
  void (*accumulate_power)(const double* interleaved, double* acc, std::size_t n);
  // interleaved complex bins scaled by a real gain per bin
  void (*scale_complex)(double* interleaved, const double* gain, std::size_t n);
  // x[k] = (x[k] - shift) * w[k]
  void (*center_and_window)(double* x, const double* w, double shift, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
};

const KernelTable& scalar();

/// Null when the build lacks the variant or the running CPU cannot execute it.
const KernelTable* avx2();
const KernelTable* neon();

/// The table used by the library, chosen once per process.
const KernelTable& active();

}  // namespace eprlock::kernels
