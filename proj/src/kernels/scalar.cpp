#include "eprlock/kernels.hpp"

namespace eprlock::kernels {

namespace {

void rational_variance(const double* omega, double* out, std::size_t n, double top, double bottom) {
  for (std::size_t k = 0; k < n; ++k) {
    const double w2 = omega[k] * omega[k];
    out[k] = (w2 + top) / (w2 + bottom);
  }
}

void multiply(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * b[k];
}

void axpby(double alpha, const double* x, double beta, const double* y, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] = alpha * x[k] + beta * y[k];
}

void rotate(const double* x, const double* p, const double* c, const double* s, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out[k] = x[k] * c[k] + p[k] * s[k];
}

void accumulate_power(const double* z, double* acc, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) acc[k] += z[2 * k] * z[2 * k] + z[2 * k + 1] * z[2 * k + 1];
}

void scale_complex(double* z, const double* gain, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    z[2 * k] *= gain[k];
    z[2 * k + 1] *= gain[k];
  }
}

void center_and_window(double* x, const double* w, double shift, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) x[k] = (x[k] - shift) * w[k];
}

double sum(const double* x, std::size_t n) {
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) total += x[k];
  return total;
}

double sum_squares(const double* x, std::size_t n) {
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) total += x[k] * x[k];
  return total;
}

}  // namespace

const KernelTable& scalar() {
  static const KernelTable table{"scalar",       rational_variance, multiply,           axpby, rotate,
                                 accumulate_power, scale_complex,     center_and_window, sum,   sum_squares};
  return table;
}

}  // namespace eprlock::kernels
