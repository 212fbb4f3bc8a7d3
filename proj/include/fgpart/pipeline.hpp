#pragma once

// Stage composition shared by the CLI and the acceptance suite. Each stage has
// an in-memory form (models in, models out) and a file form that reads its
// upstream artifacts from the model directory and writes its own outputs
// atomically, next to a snapshot of the resolved configuration.

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fgpart/fisher.hpp"
#include "fgpart/keypart.hpp"
#include "fgpart/rng.hpp"
#include "fgpart/select.hpp"
#include "fgpart/svm.hpp"

namespace fgpart {

struct PipelineConfig {
  // paths
  std::string features;  // PFV1 file holding both splits
  std::string classes;   // optional {"classes": [...]} table
  std::string model_dir = "models";
  std::string output_dir = "out";
  std::string stack = "vgg-m";  // preset name or layer-stack file

  // hyperparameters
  int pca_dims = 128;
  int components = 128;
  std::string grouping = "default";
  int scales = 13;
  double fraction = 0.25;
  double C = 1.0;
  std::uint64_t seed = 0;
  std::size_t pca_samples = 100000;  // reservoir size over all training parts
  std::size_t gmm_samples = 100000;  // reservoir size per scale group
  double gamma_threshold = 1e-6;
  int mi_bins = 8;
  double mi_smoothing = 0.5;
  bool use_mask = false;

  // key parts
  int class_a = 0;
  int class_b = 1;
  std::size_t top_k = 20;
  double nms_iou = 0.7;

  unsigned threads = 0;

  nlohmann::json to_json() const;
  /// Unknown keys and ill-typed values throw UsageError.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);
};

/// Streams image records in file (or vector) order, a batch at a time.
struct ImageSource {
  using Visitor = std::function<void(std::span<const ImageRecord>)>;
  std::function<void(std::size_t batch, const Visitor&)> visit;
};

ImageSource memory_source(const std::vector<ImageRecord>& records);
ImageSource file_source(const std::string& path);

LayerStack resolve_stack(const std::string& name_or_path);

/// Fixed-size uniform sample of a stream (algorithm R) with a seeded draw.
class Reservoir {
 public:
  Reservoir(std::size_t capacity, std::size_t dims, std::uint64_t seed);
  void offer(std::span<const double> row);
  void offer(std::span<const float> row);
  std::size_t seen() const { return seen_; }
  std::size_t size() const;
  RowMatrixD matrix() const;

 private:
  double* slot();
  std::size_t capacity_, dims_;
  std::size_t seen_ = 0;
  Rng rng_;
  std::vector<double> rows_;
};

// ------------------------------------------------------------- in-memory stages

PcaModel fit_pca_stage(const ImageSource& source, const LayerStack& stack, const PipelineConfig& cfg);

std::vector<GmmModel> fit_gmm_stage(const ImageSource& source, const LayerStack& stack, const PcaModel& pca,
                                    const ScaleGrouping& grouping, const PipelineConfig& cfg);

/// Encoded images of both splits, in source order.
struct EncodedSet {
  FvLayout layout;
  std::vector<std::size_t> kept;  // empty: full vectors
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<Split> splits;
  RowMatrixF values;

  std::size_t width() const { return static_cast<std::size_t>(values.cols()); }
  RowMatrixF rows(Split s) const;
  std::vector<int> labels_of(Split s) const;

  ModelFile to_file() const;
  static EncodedSet from_file(const ModelFile& f);
};

EncodedSet encode_stage(const ImageSource& source, const EncoderModels& models, const SelectionMask* mask,
                        const PipelineConfig& cfg);

/// MI on the training rows of a full (unmasked) encoding.
SelectionMask select_stage(const EncodedSet& encoded, const PipelineConfig& cfg);

/// Class names from the table, or "0".."C-1" from the largest label seen.
std::vector<std::string> resolve_class_names(const PipelineConfig& cfg, std::span<const int> labels);

LinearModel train_stage(const EncodedSet& encoded, std::vector<std::string> class_names, const PipelineConfig& cfg);
EvalReport eval_stage(const EncodedSet& encoded, const LinearModel& model);

struct KeyPartResult {
  PartScorerSet scorers;
  KeyPartReport report;
};
KeyPartResult keypart_stage(const ImageSource& source, const EncoderModels& models, const SelectionMask& mask,
                            const PipelineConfig& cfg);

// ------------------------------------------------------------- file stages

/// Names of the stages run_stage accepts.
const std::vector<std::string>& stage_names();

/// Runs one stage against the model/output directories. Progress and
/// summaries go to `log`. Throws MissingArtifact naming the stage to run
/// first, DataError on bad inputs.
void run_stage(const std::string& stage, const PipelineConfig& cfg, std::ostream& log);

EncoderModels load_encoder_models(const PipelineConfig& cfg);

}  // namespace fgpart
