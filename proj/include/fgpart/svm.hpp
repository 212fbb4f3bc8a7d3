#pragma once

// L2-regularized L2-loss linear SVM, dual coordinate descent (the LIBLINEAR
// default solver), one-vs-rest over classes. The bias is an extra constant
// feature of value 1 and is regularized with the weights.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fgpart/matrix.hpp"
#include "fgpart/modelio.hpp"

namespace fgpart {

struct SvmOptions {
  double C = 1.0;
  std::uint64_t seed = 0;
  /// Stop once primal - dual <= epsilon * |primal|.
  double epsilon = 1e-3;
  int max_epochs = 1000;
};

/// One binary machine: labels are +1 / -1.
struct BinarySvmResult {
  std::vector<double> w;  // feature weights
  double bias = 0.0;
  /// Minimization-form dual objective 1/2 |w~|^2 + sum a^2 / 4C - sum a after each epoch.
  std::vector<double> dual_history;
  double primal = 0.0;
  int epochs = 0;
  bool converged = false;
};

BinarySvmResult svm_train_binary(const RowMatrixF& x, std::span<const std::int8_t> y, const SvmOptions& options = {});

struct LinearModel {
  std::vector<std::string> classes;
  RowMatrixD weights;  // classes x dims
  std::vector<double> bias;
  double C = 1.0;

  int num_classes() const { return static_cast<int>(classes.size()); }
  std::size_t dims() const { return static_cast<std::size_t>(weights.cols()); }

  ModelFile to_file() const;
  static LinearModel from_file(const ModelFile& f);
};

/// Labels must be dense in [0, class count). With two classes a single
/// machine is trained and stored as rows (w, -w). Throws std::invalid_argument
/// on empty data, fewer than two classes, or label/row mismatch.
LinearModel svm_train(const RowMatrixF& x, std::span<const int> labels, std::vector<std::string> class_names,
                      const SvmOptions& options = {});

std::vector<double> decision_scores(const LinearModel& model, std::span<const float> x);
std::vector<double> decision_scores(const LinearModel& model, std::span<const double> x);

/// Argmax of the per-class scores; ties go to the lowest class index.
/// Throws std::invalid_argument on a length mismatch.
int predict(const LinearModel& model, std::span<const float> x);
int predict(const LinearModel& model, std::span<const double> x);

struct EvalReport {
  std::vector<std::string> classes;
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<std::size_t> class_total;
  std::vector<double> class_accuracy;
  /// confusion[truth][predicted]
  std::vector<std::vector<std::size_t>> confusion;

  nlohmann::json to_json() const;
};

/// Builds a report from true and predicted labels.
EvalReport make_report(std::span<const int> truth, std::span<const int> predicted, std::vector<std::string> classes);

/// Throws std::invalid_argument on an empty test set.
EvalReport evaluate(const LinearModel& model, const RowMatrixF& x, std::span<const int> labels);

}  // namespace fgpart
