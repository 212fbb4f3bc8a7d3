#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fgpart/matrix.hpp"
#include "fgpart/modelio.hpp"

namespace fgpart {

/// Projection onto the top principal directions of a descriptor sample.
/// Rows of `basis` past `effective_rank` correspond to zero-variance
/// directions and are stored as zero rows, so they project everything to 0.
struct PcaModel {
  Eigen::VectorXd mean;
  RowMatrixD basis;
  Eigen::VectorXd explained_variance;
  int effective_rank = 0;

  int input_dims() const { return static_cast<int>(mean.size()); }
  int output_dims() const { return static_cast<int>(basis.rows()); }

  /// basis * (x - mean). `out` must hold output_dims() values.
  void apply(std::span<const float> x, std::span<double> out) const;
  std::vector<double> apply(std::span<const double> x) const;

  ModelFile to_file() const;
  static PcaModel from_file(const ModelFile& f);
};

struct PcaOptions {
  /// Fit on a seeded uniform subsample of at most this many rows; 0 = all.
  std::size_t max_samples = 0;
  std::uint64_t seed = 0;
};

/// Eigendecomposition of the (1/n) sample covariance. Each basis row is
/// sign-normalized so its largest-magnitude coordinate is positive.
/// Throws std::invalid_argument if p < 1, p > d or the sample has fewer than p rows.
PcaModel pca_fit(const RowMatrixF& sample, int p, const PcaOptions& options = {});

/// Seeded uniform subsample of row indices (sorted ascending), k <= n.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace fgpart
