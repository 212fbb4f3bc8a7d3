#include <immintrin.h>

#include "fgpart/kernels.hpp"

#if !defined(__AVX2__) || !defined(__FMA__)
#error "kernels_avx2.cpp must be compiled with -mavx2 -mfma"
#endif

namespace fgpart::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void max_inplace_avx2(float* dst, const float* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    // max_ps(a, b) returns b unless a > b, same as the scalar select
    const __m256 r = _mm256_max_ps(_mm256_loadu_ps(src + i), _mm256_loadu_ps(dst + i));
    _mm256_storeu_ps(dst + i, r);
  }
  for (; i < n; ++i) dst[i] = src[i] > dst[i] ? src[i] : dst[i];
}

double scaled_sq_dist_avx2(const double* x, const double* mean, const double* inv_std, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d z = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(mean + i)),
                                    _mm256_loadu_pd(inv_std + i));
    acc = _mm256_fmadd_pd(z, z, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double z = (x[i] - mean[i]) * inv_std[i];
    s += z * z;
  }
  return s;
}

void fisher_accumulate_avx2(const double* x, const double* mean, const double* inv_std, double gamma,
                            double* acc_mean, double* acc_std, std::size_t n) {
  const __m256d g = _mm256_set1_pd(gamma);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d z = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(mean + i)),
                                    _mm256_loadu_pd(inv_std + i));
    _mm256_storeu_pd(acc_mean + i, _mm256_fmadd_pd(g, z, _mm256_loadu_pd(acc_mean + i)));
    const __m256d q = _mm256_fmsub_pd(z, z, one);
    _mm256_storeu_pd(acc_std + i, _mm256_fmadd_pd(g, q, _mm256_loadu_pd(acc_std + i)));
  }
  for (; i < n; ++i) {
    const double z = (x[i] - mean[i]) * inv_std[i];
    acc_mean[i] += gamma * z;
    acc_std[i] += gamma * (z * z - 1.0);
  }
}

double dot_dd_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot_fd_avx2(const float* x, const double* w, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xf = _mm256_loadu_ps(x + i);
    const __m256d x0 = _mm256_cvtps_pd(_mm256_castps256_ps128(xf));
    const __m256d x1 = _mm256_cvtps_pd(_mm256_extractf128_ps(xf, 1));
    acc0 = _mm256_fmadd_pd(x0, _mm256_loadu_pd(w + i), acc0);
    acc1 = _mm256_fmadd_pd(x1, _mm256_loadu_pd(w + i + 4), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += static_cast<double>(x[i]) * w[i];
  return s;
}

void axpy_fd_avx2(double a, const float* x, double* w, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xd = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    _mm256_storeu_pd(w + i, _mm256_fmadd_pd(av, xd, _mm256_loadu_pd(w + i)));
  }
  for (; i < n; ++i) w[i] += a * static_cast<double>(x[i]);
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{
      "avx2",
      max_inplace_avx2,
      scaled_sq_dist_avx2,
      fisher_accumulate_avx2,
      dot_dd_avx2,
      dot_fd_avx2,
      axpy_fd_avx2,
  };
  return table;
}

}  // namespace fgpart::simd
