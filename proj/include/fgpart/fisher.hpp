#pragma once

// Scale-pyramid Fisher-vector encoding. Each scale group j gets its own GMM
// and its own FV block; blocks are power- and l2-normalized independently
// and concatenated in group order.

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

#include "fgpart/featio.hpp"
#include "fgpart/geometry.hpp"
#include "fgpart/gmm.hpp"
#include "fgpart/grouping.hpp"
#include "fgpart/matrix.hpp"
#include "fgpart/mmp.hpp"
#include "fgpart/pca.hpp"

namespace fgpart {

struct SelectionMask;

/// Flat index layout of a full FV: group-major, then component, then the
/// mean-gradient part (dims values) followed by the std-gradient part.
struct FvLayout {
  enum class Part { Mean = 0, Std = 1 };

  int groups = 0;
  int components = 0;
  int dims = 0;

  std::size_t cluster_size() const { return 2 * static_cast<std::size_t>(dims); }
  std::size_t block_size() const { return cluster_size() * components; }
  std::size_t size() const { return block_size() * groups; }
  std::size_t clusters() const { return static_cast<std::size_t>(groups) * components; }

  std::size_t index(int group, int component, Part part, int dim) const {
    return static_cast<std::size_t>(group) * block_size() + static_cast<std::size_t>(component) * cluster_size() +
           static_cast<std::size_t>(part) * dims + dim;
  }
  /// Flat cluster id (group * components + component) owning a dimension.
  std::size_t cluster_of(std::size_t flat_index) const { return flat_index / cluster_size(); }

  nlohmann::json to_json() const;
  static FvLayout from_json(const nlohmann::json& j);

  friend bool operator==(const FvLayout&, const FvLayout&) = default;
};

struct FisherVector {
  FvLayout layout;
  /// Full vector (layout.size() values) or, when `kept` is non-empty, only
  /// the dimensions of the kept clusters in ascending cluster order.
  std::vector<double> values;
  std::vector<std::size_t> kept;
};

/// Sort key giving the fixed summation order of parts inside an image.
struct PartKey {
  std::uint32_t proposal = 0;
  int scale = 1;
  int row = 0;
  int col = 0;

  friend auto operator<=>(const PartKey&, const PartKey&) = default;
};

struct EncodeOptions {
  /// Posteriors below this are skipped during accumulation; a speed trade.
  /// Use 0 for the exact sum.
  double gamma_threshold = 1e-6;
};

/// Running sums for one group's FV block; parts are added in caller order.
class FisherAccumulator {
 public:
  FisherAccumulator(const GmmEvaluator& gmm, const EncodeOptions& options = {});

  void add(std::span<const double> x);
  std::size_t count() const { return count_; }

  /// Raw (unnormalized) block of length 2 p K with the 1/sqrt(w) and
  /// 1/sqrt(2w) factors applied. Zero when no part was added.
  std::vector<double> finish() const;

 private:
  const GmmEvaluator* gmm_;
  EncodeOptions options_;
  std::vector<double> acc_;
  std::vector<double> gamma_;
  std::size_t count_ = 0;
};

/// Raw FV block of the given parts (rows of `descriptors`, already PCA-reduced).
/// Parts are summed in ascending key order, so any permutation of the
/// (key, descriptor) pairs gives a bitwise identical block. Every key's scale
/// must belong to `group` of `grouping`.
std::vector<double> encode_group(std::span<const PartKey> keys, const RowMatrixD& descriptors, const GmmModel& model,
                                 const ScaleGrouping& grouping, int group, const EncodeOptions& options = {});

/// Unkeyed convenience: parts summed in row order.
std::vector<double> encode_group(const RowMatrixD& descriptors, const GmmModel& model,
                                 const EncodeOptions& options = {});

/// z <- sign(z) |z|^0.5, then l2 normalization; zero blocks stay zero.
void normalize_block(std::span<double> block);

FisherVector normalize_and_concat(std::vector<std::vector<double>> blocks, const FvLayout& layout);

/// Keeps only the dimensions of clusters kept by `mask`.
FisherVector apply_mask(const FisherVector& fv, const SelectionMask& mask);

/// Everything needed to go from a feature map to a Fisher vector.
struct EncoderModels {
  LayerStack stack;
  ScaleGrouping grouping;
  PcaModel pca;
  std::vector<GmmModel> gmms;  // one per group, in group order

  /// Throws DataError when the pieces do not fit together.
  void validate() const;
  FvLayout layout() const;
};

/// PCA-reduced descriptors of a part set (rows follow `parts` order).
RowMatrixD reduce_parts(const PartSet& parts, const PcaModel& pca);

/// Streaming image encoder: proposals are pooled, reduced and accumulated
/// one at a time in (proposal, scale, row, col) order.
class ImageEncoder {
 public:
  ImageEncoder(const EncoderModels& models, const EncodeOptions& options = {});
  ImageEncoder(const ImageEncoder&) = delete;
  ImageEncoder& operator=(const ImageEncoder&) = delete;

  void add_proposal(const ProposalRecord& proposal);
  FisherVector finish(const SelectionMask* mask = nullptr) const;

 private:
  const EncoderModels* models_;
  std::vector<GmmEvaluator> evaluators_;
  std::vector<FisherAccumulator> accumulators_;
};

/// MMP -> PCA -> per-group encoding -> normalization (-> mask).
FisherVector encode_image(const ImageRecord& record, const EncoderModels& models, const SelectionMask* mask = nullptr,
                          const EncodeOptions& options = {});

}  // namespace fgpart
