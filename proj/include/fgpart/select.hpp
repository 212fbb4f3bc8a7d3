#pragma once

#include <span>
#include <string>
#include <vector>

#include "fgpart/fisher.hpp"
#include "fgpart/matrix.hpp"

namespace fgpart {

struct MiOptions {
  /// Equal-frequency bins per dimension (fewer when values repeat).
  int bins = 8;
  /// Total additive pseudo-count of the nominal bins x labels table; each
  /// occupied (bin, label) cell receives total / (bins * labels).
  double smoothing = 0.5;
  /// Receives a message for every class with fewer than two samples.
  std::vector<std::string>* warnings = nullptr;
};

/// Bin index of each value: the number of equal-frequency cut points <= value.
/// Cut points are the order statistics at k n / bins, k = 1..bins-1, deduplicated.
std::vector<int> equal_frequency_bins(std::span<const float> values, int bins);

/// Plug-in mutual information (nats) between each column of `x` and the
/// labels, on equal-frequency quantized columns with additive smoothing.
/// Throws std::invalid_argument for fewer than two classes or a row/label mismatch.
std::vector<double> mi_per_dimension(const RowMatrixF& x, std::span<const int> labels, const MiOptions& options = {});

/// MI of one already-quantized column; exposed for tests.
double mutual_information(std::span<const int> bins, std::span<const int> labels, double pseudo_count);

/// Per-cluster sum of MI over the cluster's 2 p dimensions, indexed by flat
/// cluster id (group * K + component).
struct ClusterImportance {
  FvLayout layout;
  std::vector<double> scores;
};

ClusterImportance cluster_importance(std::span<const double> mi, const FvLayout& layout);

struct SelectionMask {
  double fraction = 1.0;
  FvLayout layout;
  /// Cluster ids, most important first (ties: lower id first).
  std::vector<std::size_t> ranking;
  std::vector<bool> kept;
  std::vector<double> importance;

  std::size_t kept_count() const;
  /// Kept cluster ids, ascending.
  std::vector<std::size_t> kept_clusters() const;
  std::size_t masked_length() const { return kept_count() * layout.cluster_size(); }

  nlohmann::json to_json() const;
  static SelectionMask from_json(const nlohmann::json& j);
};

/// Keeps the top round(fraction * m * K) clusters (at least one) of a global
/// ranking across all scale groups. Throws std::invalid_argument unless 0 < fraction <= 1.
SelectionMask select_clusters(const ClusterImportance& importance, double fraction);

/// The fractions reported by the selection experiments: 1, 3/4, 1/2, 1/4, 1/8.
inline constexpr double kSelectionFractions[] = {1.0, 0.75, 0.5, 0.25, 0.125};

}  // namespace fgpart
