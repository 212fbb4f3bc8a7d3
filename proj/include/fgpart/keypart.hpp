#pragma once

// Pairwise key-part detection. For classes A (positive) and B (negative),
// each kept cluster gets a binary linear scorer trained on per-image
// VLAD-style aggregates; a part's score is the scorer's dot product with its
// centered descriptor.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fgpart/fisher.hpp"
#include "fgpart/select.hpp"
#include "fgpart/svm.hpp"

namespace fgpart {

/// One part proposal after PCA, hard-assigned to a cluster of its group.
struct ReducedPart {
  std::uint32_t proposal = 0;
  PartInfo info;
  int group = 0;
  int component = 0;
  std::size_t cluster = 0;  // group * K + component
  std::vector<double> x;
};

struct ReducedImage {
  std::string image_id;
  std::int32_t label = 0;
  Split split = Split::Train;
  std::vector<ReducedPart> parts;  // (proposal, scale, row, col) order
};

/// MMP + PCA + argmax-posterior assignment for every part of every proposal.
ReducedImage reduce_image(const ImageRecord& record, const EncoderModels& models);

/// sum_t (x_t - center), l2-normalized; zero when empty or when it cancels.
std::vector<double> aggregate_cluster_feature(std::span<const std::vector<double>> parts, std::span<const double> center);

struct ClusterScorer {
  std::size_t cluster = 0;
  std::vector<double> center;
  std::vector<double> w;  // bias discarded
};

struct PartScorerSet {
  int class_a = 0;
  int class_b = 0;
  int components = 0;
  std::vector<ClusterScorer> scorers;  // ascending cluster id

  const ClusterScorer* find(std::size_t cluster) const;

  ModelFile to_file() const;
  static PartScorerSet from_file(const ModelFile& f);
};

/// Per-image aggregates for each cluster in `kept` (one row per kept cluster,
/// in `kept` order).
RowMatrixF cluster_aggregates(const ReducedImage& image, std::span<const std::size_t> kept, const EncoderModels& models);

/// Scorers from precomputed aggregates; y[i] is +1 for A and -1 for B.
PartScorerSet train_scorers_from_aggregates(std::span<const RowMatrixF> aggregates, std::span<const std::int8_t> y,
                                            int class_a, int class_b, std::span<const std::size_t> kept,
                                            const EncoderModels& models, const SvmOptions& options = {});

/// Trains one binary SVM per kept cluster on the training images of A and B.
/// Throws DataError when either class has no training image.
PartScorerSet train_pair_scorers(std::span<const ReducedImage> images, int class_a, int class_b,
                                 const SelectionMask& mask, const EncoderModels& models, const SvmOptions& options = {});

struct ScoredPart {
  std::string image_id;
  std::uint32_t proposal = 0;
  int scale = 1;
  int row = 0;
  int col = 0;
  Box box;
  std::size_t cluster = 0;
  double score = 0.0;
};

/// score = w_k . (x - center_k) for every part in a scored cluster; other
/// parts are omitted.
std::vector<ScoredPart> score_parts(const ReducedImage& image, const PartScorerSet& scorers);

struct KeyPartReport {
  int class_a = 0;
  int class_b = 0;
  std::size_t k = 20;
  double nms_iou = 0.7;
  std::vector<ScoredPart> top;     // highest scores: evidence for A
  std::vector<ScoredPart> bottom;  // lowest scores: evidence for B

  nlohmann::json to_json(const std::vector<std::string>& class_names = {}, int components = 0) const;
};

/// Top-k and bottom-k parts. Equal scores are ordered by (image id, scale,
/// row, col, proposal). Within one image, a part overlapping an already
/// chosen part of the same list with IoU > nms_iou is skipped.
KeyPartReport top_parts_report(std::span<const ScoredPart> parts, std::size_t k = 20, double nms_iou = 0.7);

}  // namespace fgpart
