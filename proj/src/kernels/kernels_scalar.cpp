#include "fgpart/kernels.hpp"

namespace fgpart::simd {
namespace {

void max_inplace_scalar(float* dst, const float* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] > dst[i] ? src[i] : dst[i];
}

double scaled_sq_dist_scalar(const double* x, const double* mean, const double* inv_std, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (x[i] - mean[i]) * inv_std[i];
    s += z * z;
  }
  return s;
}

void fisher_accumulate_scalar(const double* x, const double* mean, const double* inv_std, double gamma,
                              double* acc_mean, double* acc_std, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (x[i] - mean[i]) * inv_std[i];
    acc_mean[i] += gamma * z;
    acc_std[i] += gamma * (z * z - 1.0);
  }
}

double dot_dd_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot_fd_scalar(const float* x, const double* w, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]) * w[i];
  return s;
}

void axpy_fd_scalar(double a, const float* x, double* w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) w[i] += a * static_cast<double>(x[i]);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      "scalar",
      max_inplace_scalar,
      scaled_sq_dist_scalar,
      fisher_accumulate_scalar,
      dot_dd_scalar,
      dot_fd_scalar,
      axpy_fd_scalar,
  };
  return table;
}

}  // namespace fgpart::simd
