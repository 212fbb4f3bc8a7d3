#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference version and,
// on x86-64 builds, an AVX2/FMA version; the table used by the library is
// chosen once at runtime from CPU features (override with FGPART_SIMD=scalar).
//
// Contract shared by all variants:
//   max_inplace     bitwise identical across variants
//   everything else equal to the scalar reference within a few ulps of the
//                   accumulated magnitude (lane-wise partial sums, FMA)

#include <cstddef>
#include <span>
#include <string_view>

namespace fgpart::simd {

struct KernelTable {
  std::string_view name;

  /// dst[i] = max(dst[i], src[i])
  void (*max_inplace)(float* dst, const float* src, std::size_t n);

  /// sum_i ((x[i] - mean[i]) * inv_std[i])^2
  double (*scaled_sq_dist)(const double* x, const double* mean, const double* inv_std, std::size_t n);

  /// z = (x - mean) * inv_std;  acc_mean += gamma * z;  acc_std += gamma * (z*z - 1)
  void (*fisher_accumulate)(const double* x, const double* mean, const double* inv_std, double gamma,
                            double* acc_mean, double* acc_std, std::size_t n);

  double (*dot_dd)(const double* a, const double* b, std::size_t n);
  double (*dot_fd)(const float* x, const double* w, std::size_t n);

  /// w += a * x
  void (*axpy_fd)(double a, const float* x, double* w, std::size_t n);
};

const KernelTable& scalar_kernels();

/// AVX2 table, or nullptr when not compiled in or not supported by this CPU.
const KernelTable* avx2_kernels();

/// The table selected for this process.
const KernelTable& kernels();

/// Forces a specific table (tests and benchmarking). Not thread-safe with
/// concurrent kernel use.
void use_kernels(const KernelTable& table);

// Span conveniences over the active table.
inline void max_inplace(std::span<float> dst, std::span<const float> src) {
  kernels().max_inplace(dst.data(), src.data(), dst.size());
}
inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot_dd(a.data(), b.data(), a.size());
}
inline double dot(std::span<const float> x, std::span<const double> w) {
  return kernels().dot_fd(x.data(), w.data(), x.size());
}

}  // namespace fgpart::simd
