#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fgpart/matrix.hpp"
#include "fgpart/modelio.hpp"

namespace fgpart {

/// Diagonal-covariance Gaussian mixture: the codebook of one scale group.
struct GmmModel {
  int group = 0;
  Eigen::VectorXd weights;  // K, sums to 1
  RowMatrixD means;         // K x p
  RowMatrixD stds;          // K x p, strictly positive

  int components() const { return static_cast<int>(weights.size()); }
  int dims() const { return static_cast<int>(means.cols()); }

  /// Throws DataError on shape mismatch, non-positive std or weights off 1.
  void validate() const;

  ModelFile to_file() const;
  /// Weights are renormalized in double precision after loading.
  static GmmModel from_file(const ModelFile& f);
};

/// Precomputed per-component constants for repeated evaluation.
class GmmEvaluator {
 public:
  explicit GmmEvaluator(const GmmModel& model);

  const GmmModel& model() const { return model_; }
  int components() const { return model_.components(); }
  int dims() const { return model_.dims(); }
  std::span<const double> inv_std(int k) const {
    return {inv_std_.data() + static_cast<std::size_t>(k) * dims(), static_cast<std::size_t>(dims())};
  }

  /// out[k] = log w_k + log N(x; mu_k, diag(sigma_k^2)).
  void log_joint(std::span<const double> x, std::span<double> out) const;

  /// Normalized posteriors via log-sum-exp; returns log p(x).
  double posteriors(std::span<const double> x, std::span<double> out) const;

  /// Index of the largest posterior (lowest index on ties).
  int assign(std::span<const double> x) const;

 private:
  GmmModel model_;
  std::vector<double> inv_std_;
  std::vector<double> log_norm_;
};

/// Posterior responsibilities of x under `model`; K values summing to 1.
std::vector<double> posteriors(const GmmModel& model, std::span<const double> x);

struct GmmOptions {
  std::uint64_t seed = 0;
  int max_iterations = 100;
  /// Stop when the mean log-likelihood improves by less than this, relative.
  double tolerance = 1e-6;
  /// Variance floor, as a fraction of each dimension's sample variance.
  double variance_floor_ratio = 1e-4;
  /// Points per E-step chunk; statistics are reduced in chunk order.
  std::size_t chunk_size = 2048;
};

struct GmmFitResult {
  GmmModel model;
  /// Mean per-point log-likelihood of each EM iterate; the last entry
  /// belongs to the returned model.
  std::vector<double> log_likelihood;
  int iterations = 0;
  int reseeds = 0;
  bool converged = false;
};

/// EM from a k-means++ start. The sample is put in canonical (lexicographic)
/// row order first, so the result depends only on the set of rows and the
/// seed. Components that lose all mass are re-seeded at the point farthest
/// (Mahalanobis) from its nearest live component.
/// Throws std::invalid_argument when the sample has fewer than 10 K rows.
GmmFitResult gmm_fit(const RowMatrixD& sample, int components, const GmmOptions& options = {});

}  // namespace fgpart
