// AArch64 Advanced SIMD variants; two doubles per register.

#include <arm_neon.h>

#include "eprlock/kernels.hpp"
#include "kernels/detail.hpp"

namespace eprlock::kernels {

namespace {

constexpr std::size_t kWidth = 2;

void rational_variance(const double* omega, double* out, std::size_t n, double top, double bottom) {
  const float64x2_t t = vdupq_n_f64(top);
  const float64x2_t b = vdupq_n_f64(bottom);
  std::size_t k = 0;
  for (; k + kWidth <= n; k += kWidth) {
    const float64x2_t w = vld1q_f64(omega + k);
    const float64x2_t w2 = vmulq_f64(w, w);
    vst1q_f64(out + k, vdivq_f64(vaddq_f64(w2, t), vaddq_f64(w2, b)));
  }
  for (; k < n; ++k) {
    const double w2 = omega[k] * omega[k];
    out[k] = (w2 + top) / (w2 + bottom);
  }
}

void multiply(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + kWidth <= n; k += kWidth) vst1q_f64(out + k, vmulq_f64(vld1q_f64(a + k), vld1q_f64(b + k)));
  for (; k < n; ++k) out[k] = a[k] * b[k];
}

void axpby(double alpha, const double* x, double beta, const double* y, double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const float64x2_t vb = vdupq_n_f64(beta);
  std::size_t k = 0;
  for (; k + kWidth <= n; k += kWidth) {
    const float64x2_t by = vmulq_f64(vb, vld1q_f64(y + k));
    vst1q_f64(out + k, vfmaq_f64(by, va, vld1q_f64(x + k)));
  }
  for (; k < n; ++k) out[k] = alpha * x[k] + beta * y[k];
}

void rotate(const double* x, const double* p, const double* c, const double* s, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + kWidth <= n; k += kWidth) {
    const float64x2_t ps = vmulq_f64(vld1q_f64(p + k), vld1q_f64(s + k));
    vst1q_f64(out + k, vfmaq_f64(ps, vld1q_f64(x + k), vld1q_f64(c + k)));
  }
  for (; k < n; ++k) out[k] = x[k] * c[k] + p[k] * s[k];
}

void accumulate_power(const double* z, double* acc, std::size_t n) {
  std::size_t k = 0;
  for (; k + kWidth <= n; k += kWidth) {
    const float64x2x2_t bins = vld2q_f64(z + 2 * k);  // deinterleaves re / im
    const float64x2_t power = vfmaq_f64(vmulq_f64(bins.val[0], bins.val[0]), bins.val[1], bins.val[1]);
    vst1q_f64(acc + k, vaddq_f64(vld1q_f64(acc + k), power));
  }
  for (; k < n; ++k) acc[k] += z[2 * k] * z[2 * k] + z[2 * k + 1] * z[2 * k + 1];
}

void scale_complex(double* z, const double* gain, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const float64x2_t bin = vld1q_f64(z + 2 * k);
    vst1q_f64(z + 2 * k, vmulq_n_f64(bin, gain[k]));
  }
}

void center_and_window(double* x, const double* w, double shift, std::size_t n) {
  const float64x2_t vs = vdupq_n_f64(shift);
  std::size_t k = 0;
  for (; k + kWidth <= n; k += kWidth) {
    vst1q_f64(x + k, vmulq_f64(vsubq_f64(vld1q_f64(x + k), vs), vld1q_f64(w + k)));
  }
  for (; k < n; ++k) x[k] = (x[k] - shift) * w[k];
}

double sum(const double* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 2 * kWidth <= n; k += 2 * kWidth) {
    acc0 = vaddq_f64(acc0, vld1q_f64(x + k));
    acc1 = vaddq_f64(acc1, vld1q_f64(x + k + kWidth));
  }
  double total = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; k < n; ++k) total += x[k];
  return total;
}

double sum_squares(const double* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 2 * kWidth <= n; k += 2 * kWidth) {
    const float64x2_t a = vld1q_f64(x + k);
    const float64x2_t b = vld1q_f64(x + k + kWidth);
    acc0 = vfmaq_f64(acc0, a, a);
    acc1 = vfmaq_f64(acc1, b, b);
  }
  double total = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; k < n; ++k) total += x[k] * x[k];
  return total;
}

}  // namespace

namespace detail {

const KernelTable& neon_table() {
  static const KernelTable table{"neon",           rational_variance, multiply,           axpby, rotate,
                                 accumulate_power, scale_complex,       center_and_window, sum,   sum_squares};
  return table;
}

}  // namespace detail

}  // namespace eprlock::kernels
