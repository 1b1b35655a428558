// Built with -mavx2 -mfma. Only reached through dispatch after a CPU check.

#include <immintrin.h>

#include "eprlock/kernels.hpp"
#include "kernels/detail.hpp"

namespace eprlock::kernels {

namespace {

constexpr std::size_t kWidth = 4;

double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

void rational_variance(const double* omega, double* out, std::size_t n, double top, double bottom) {
  const __m256d t = _mm256_set1_pd(top);
  const __m256d b = _mm256_set1_pd(bottom);
  std::size_t k = 0;
  for (; k + kWidth <= n; k += kWidth) {
    const __m256d w = _mm256_loadu_pd(omega + k);
    const __m256d w2 = _mm256_mul_pd(w, w);  // no fma: keeps results bit-identical to the reference
    _mm256_storeu_pd(out + k, _mm256_div_pd(_mm256_add_pd(w2, t), _mm256_add_pd(w2, b)));
  }
  for (; k < n; ++k) {
    const double w2 = omega[k] * omega[k];
    out[k] = (w2 + top) / (w2 + bottom);
  }
}

void multiply(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + kWidth <= n; k += kWidth) {
    _mm256_storeu_pd(out + k, _mm256_mul_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k)));
  }
  for (; k < n; ++k) out[k] = a[k] * b[k];
}

void axpby(double alpha, const double* x, double beta, const double* y, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vb = _mm256_set1_pd(beta);
  std::size_t k = 0;
  for (; k + kWidth <= n; k += kWidth) {
    const __m256d by = _mm256_mul_pd(vb, _mm256_loadu_pd(y + k));
    _mm256_storeu_pd(out + k, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), by));
  }
  for (; k < n; ++k) out[k] = alpha * x[k] + beta * y[k];
}

void rotate(const double* x, const double* p, const double* c, const double* s, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + kWidth <= n; k += kWidth) {
    const __m256d ps = _mm256_mul_pd(_mm256_loadu_pd(p + k), _mm256_loadu_pd(s + k));
    _mm256_storeu_pd(out + k, _mm256_fmadd_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(c + k), ps));
  }
  for (; k < n; ++k) out[k] = x[k] * c[k] + p[k] * s[k];
}

void accumulate_power(const double* z, double* acc, std::size_t n) {
  std::size_t k = 0;
  // Two complex bins per 256-bit register; pairs of registers give four bins.
  for (; k + kWidth <= n; k += kWidth) {
    const __m256d z01 = _mm256_loadu_pd(z + 2 * k);      // re0 im0 re1 im1
    const __m256d z23 = _mm256_loadu_pd(z + 2 * k + 4);  // re2 im2 re3 im3
    const __m256d sq01 = _mm256_mul_pd(z01, z01);
    const __m256d sq23 = _mm256_mul_pd(z23, z23);
    const __m256d h = _mm256_hadd_pd(sq01, sq23);         // p0 p2 p1 p3
    const __m256d ordered = _mm256_permute4x64_pd(h, 0b11011000);  // p0 p1 p2 p3
    _mm256_storeu_pd(acc + k, _mm256_add_pd(_mm256_loadu_pd(acc + k), ordered));
  }
  for (; k < n; ++k) acc[k] += z[2 * k] * z[2 * k] + z[2 * k + 1] * z[2 * k + 1];
}

void scale_complex(double* z, const double* gain, std::size_t n) {
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    // g0 g0 g1 g1
    const __m128d g = _mm_loadu_pd(gain + k);
    const __m256d gg = _mm256_permute4x64_pd(_mm256_castpd128_pd256(g), 0b01010000);
    _mm256_storeu_pd(z + 2 * k, _mm256_mul_pd(_mm256_loadu_pd(z + 2 * k), gg));
  }
  for (; k < n; ++k) {
    z[2 * k] *= gain[k];
    z[2 * k + 1] *= gain[k];
  }
}

void center_and_window(double* x, const double* w, double shift, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(shift);
  std::size_t k = 0;
  for (; k + kWidth <= n; k += kWidth) {
    const __m256d centered = _mm256_sub_pd(_mm256_loadu_pd(x + k), vs);
    _mm256_storeu_pd(x + k, _mm256_mul_pd(centered, _mm256_loadu_pd(w + k)));
  }
  for (; k < n; ++k) x[k] = (x[k] - shift) * w[k];
}

double sum(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 2 * kWidth <= n; k += 2 * kWidth) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + k));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + k + kWidth));
  }
  double total = horizontal_sum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) total += x[k];
  return total;
}

double sum_squares(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 2 * kWidth <= n; k += 2 * kWidth) {
    const __m256d a = _mm256_loadu_pd(x + k);
    const __m256d b = _mm256_loadu_pd(x + k + kWidth);
    acc0 = _mm256_fmadd_pd(a, a, acc0);
    acc1 = _mm256_fmadd_pd(b, b, acc1);
  }
  double total = horizontal_sum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) total += x[k] * x[k];
  return total;
}

}  // namespace

namespace detail {

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2",           rational_variance, multiply,           axpby, rotate,
                                 accumulate_power, scale_complex,       center_and_window, sum,   sum_squares};
  return table;
}

}  // namespace detail

}  // namespace eprlock::kernels
