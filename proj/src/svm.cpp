#include "fgpart/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fgpart/errors.hpp"
#include "fgpart/kernels.hpp"
#include "fgpart/parallel.hpp"
#include "fgpart/rng.hpp"

namespace fgpart {

namespace {

double sq_norm(std::span<const double> v) { return simd::dot(v, v); }

}  // namespace

BinarySvmResult svm_train_binary(const RowMatrixF& x, std::span<const std::int8_t> y, const SvmOptions& options) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  if (n == 0) throw std::invalid_argument("svm: empty training set");
  if (y.size() != n) throw std::invalid_argument("svm: label count does not match rows");
  if (!(options.C > 0.0)) throw std::invalid_argument("svm: C must be positive");
  for (auto v : y)
    if (v != 1 && v != -1) throw std::invalid_argument("svm: binary labels must be +1 or -1");

  const auto& kt = simd::kernels();
  const double diag = 1.0 / (2.0 * options.C);
  std::vector<double> qbar(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* xi = x.data() + i * d;
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += static_cast<double>(xi[k]) * xi[k];
    qbar[i] = s + 1.0 + diag;
  }

  BinarySvmResult r;
  r.w.assign(d, 0.0);
  double b = 0.0;
  std::vector<double> alpha(n, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(options.seed);

  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const float* xi = x.data() + i * d;
      const double yi = y[i];
      const double g = yi * (kt.dot_fd(xi, r.w.data(), d) + b) - 1.0 + diag * alpha[i];
      const double next = std::max(alpha[i] - g / qbar[i], 0.0);
      const double delta = next - alpha[i];
      if (delta == 0.0) continue;
      alpha[i] = next;
      kt.axpy_fd(delta * yi, xi, r.w.data(), d);
      b += delta * yi;
    }
    r.epochs = epoch + 1;

    const double wn = sq_norm(r.w) + b * b;
    double sa = 0.0, sa2 = 0.0;
    for (double a : alpha) {
      sa += a;
      sa2 += a * a;
    }
    const double dual_min = 0.5 * wn + sa2 * diag / 2.0 - sa;
    r.dual_history.push_back(dual_min);

    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = 1.0 - y[i] * (kt.dot_fd(x.data() + i * d, r.w.data(), d) + b);
      if (m > 0.0) loss += m * m;
    }
    r.primal = 0.5 * wn + options.C * loss;
    if (r.primal - (-dual_min) <= options.epsilon * std::abs(r.primal)) {
      r.converged = true;
      break;
    }
  }
  r.bias = b;
  return r;
}

LinearModel svm_train(const RowMatrixF& x, std::span<const int> labels, std::vector<std::string> class_names,
                      const SvmOptions& options) {
  if (x.rows() == 0) throw std::invalid_argument("svm: empty training set");
  if (labels.size() != static_cast<std::size_t>(x.rows())) throw std::invalid_argument("svm: label count does not match rows");
  const int classes = static_cast<int>(class_names.size());
  if (classes < 2) throw std::invalid_argument("svm: need at least two classes");
  std::vector<std::size_t> seen(static_cast<std::size_t>(classes), 0);
  for (int l : labels) {
    if (l < 0 || l >= classes) throw std::invalid_argument("svm: label " + std::to_string(l) + " outside the class table");
    ++seen[static_cast<std::size_t>(l)];
  }
  if (std::count_if(seen.begin(), seen.end(), [](std::size_t c) { return c > 0; }) < 2) {
    throw std::invalid_argument("svm: training data contains a single class");
  }

  LinearModel model;
  model.classes = std::move(class_names);
  model.C = options.C;
  model.weights = RowMatrixD::Zero(classes, x.cols());
  model.bias.assign(static_cast<std::size_t>(classes), 0.0);

  const int machines = classes == 2 ? 1 : classes;
  std::vector<BinarySvmResult> results(static_cast<std::size_t>(machines));
  parallel_for(static_cast<std::size_t>(machines), [&](std::size_t c) {
    std::vector<std::int8_t> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == static_cast<int>(c) ? 1 : -1;
    SvmOptions o = options;
    o.seed = derive_seed(options.seed, c);
    results[c] = svm_train_binary(x, y, o);
  });
  for (int c = 0; c < machines; ++c) {
    const auto& r = results[static_cast<std::size_t>(c)];
    for (std::size_t k = 0; k < r.w.size(); ++k) model.weights(c, static_cast<Eigen::Index>(k)) = r.w[k];
    model.bias[static_cast<std::size_t>(c)] = r.bias;
  }
  if (classes == 2) {
    model.weights.row(1) = -model.weights.row(0);
    model.bias[1] = -model.bias[0];
  }
  return model;
}

std::vector<double> decision_scores(const LinearModel& model, std::span<const float> x) {
  if (x.size() != model.dims()) {
    throw std::invalid_argument("predict: vector length " + std::to_string(x.size()) + " does not match model length " +
                                std::to_string(model.dims()));
  }
  std::vector<double> s(model.classes.size());
  for (int c = 0; c < model.num_classes(); ++c) s[c] = simd::dot(x, row_span(model.weights, c)) + model.bias[c];
  return s;
}

std::vector<double> decision_scores(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.dims()) {
    throw std::invalid_argument("predict: vector length " + std::to_string(x.size()) + " does not match model length " +
                                std::to_string(model.dims()));
  }
  std::vector<double> s(model.classes.size());
  for (int c = 0; c < model.num_classes(); ++c) s[c] = simd::dot(x, row_span(model.weights, c)) + model.bias[c];
  return s;
}

namespace {
int argmax(const std::vector<double>& s) {
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());  // first maximum
}
}  // namespace

int predict(const LinearModel& model, std::span<const float> x) { return argmax(decision_scores(model, x)); }
int predict(const LinearModel& model, std::span<const double> x) { return argmax(decision_scores(model, x)); }

EvalReport make_report(std::span<const int> truth, std::span<const int> predicted, std::vector<std::string> classes) {
  if (truth.empty()) throw std::invalid_argument("evaluate: empty test set");
  if (truth.size() != predicted.size()) throw std::invalid_argument("evaluate: truth/prediction length mismatch");
  const std::size_t k = classes.size();
  EvalReport r;
  r.classes = std::move(classes);
  r.total = truth.size();
  r.class_total.assign(k, 0);
  r.class_accuracy.assign(k, 0.0);
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (truth[i] < 0 || t >= k || predicted[i] < 0 || p >= k) throw std::invalid_argument("evaluate: label outside class table");
    ++r.class_total[t];
    ++r.confusion[t][p];
    if (t == p) ++r.correct;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  for (std::size_t c = 0; c < k; ++c) {
    if (r.class_total[c] > 0) r.class_accuracy[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(r.class_total[c]);
  }
  return r;
}

EvalReport evaluate(const LinearModel& model, const RowMatrixF& x, std::span<const int> labels) {
  if (x.rows() == 0) throw std::invalid_argument("evaluate: empty test set");
  if (labels.size() != static_cast<std::size_t>(x.rows())) throw std::invalid_argument("evaluate: label count does not match rows");
  std::vector<int> pred(labels.size());
  parallel_for(pred.size(), [&](std::size_t i) { pred[i] = predict(model, row_span(x, static_cast<Eigen::Index>(i))); });
  return make_report(labels, pred, model.classes);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < classes.size(); ++c) {
    per_class.push_back({{"class", classes[c]}, {"index", c}, {"count", class_total[c]}, {"accuracy", class_accuracy[c]}});
  }
  return nlohmann::json{{"accuracy", accuracy},
                        {"correct", correct},
                        {"total", total},
                        {"per_class", per_class},
                        {"confusion", confusion}};
}

ModelFile LinearModel::to_file() const {
  ModelFile f;
  f.kind = "linear-svm";
  f.meta["classes"] = classes;
  f.meta["C"] = C;
  f.meta["dims"] = dims();
  const auto k = classes.size();
  f.add("weights", {k, dims()}, std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())));
  f.add("bias", {k}, std::span<const double>(bias));
  return f;
}

LinearModel LinearModel::from_file(const ModelFile& f) {
  try {
    LinearModel m;
    m.classes = f.meta.at("classes").get<std::vector<std::string>>();
    m.C = f.meta.at("C").get<double>();
    const auto d = f.meta.at("dims").get<std::size_t>();
    const auto k = m.classes.size();
    if (k < 2) throw DataError("linear model: fewer than two classes");
    const auto w = f.doubles("weights", k * d);
    m.weights.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    std::copy(w.begin(), w.end(), m.weights.data());
    m.bias = f.doubles("bias", k);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("linear model: ") + e.what());
  }
}

}  // namespace fgpart
