#include <cmath>

#include "doctest.h"
#include "fgpart/errors.hpp"
#include "fgpart/rng.hpp"
#include "fgpart/svm.hpp"
#include "oracles.hpp"

using namespace fgpart;

namespace {

struct Blobs {
  RowMatrixF x;
  std::vector<int> labels;
};

Blobs blobs(int classes, int per_class, int dims, double spread, std::uint64_t seed) {
  Rng rng(seed);
  Blobs b;
  b.x.resize(classes * per_class, dims);
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const int row = c * per_class + i;
      for (int d = 0; d < dims; ++d) b.x(row, d) = static_cast<float>((d == c % dims ? 4.0 : 0.0) + spread * rng.normal());
      b.labels.push_back(c);
    }
  }
  return b;
}

std::vector<std::int8_t> signs(const std::vector<int>& labels) {
  std::vector<std::int8_t> y;
  for (int l : labels) y.push_back(l == 0 ? 1 : -1);
  return y;
}

double primal_of(const RowMatrixF& x, const std::vector<std::int8_t>& y, double C, const BinarySvmResult& r) {
  std::vector<std::vector<double>> rows;
  std::vector<int> yy(y.begin(), y.end());
  for (Eigen::Index i = 0; i < x.rows(); ++i) rows.emplace_back(x.row(i).begin(), x.row(i).end());
  return oracle::squared_hinge_primal(rows, yy, C, r.w, r.bias);
}

}  // namespace

TEST_CASE("separable blobs are classified perfectly") {
  const Blobs b = blobs(2, 100, 5, 0.3, 1);
  const LinearModel m = svm_train(b.x, b.labels, {"a", "b"});
  CHECK(evaluate(m, b.x, b.labels).accuracy == 1.0);
  CHECK(m.weights.row(1).isApprox(-m.weights.row(0)));
  CHECK(m.bias[1] == -m.bias[0]);
}

TEST_CASE("matches the primal reference solution") {
  for (std::uint64_t seed : {2u, 3u, 4u}) {
    const Blobs b = blobs(2, 40, 3, 2.0, seed);  // overlapping: many active slacks
    const auto y = signs(b.labels);
    SvmOptions o;
    o.C = 0.5;
    o.epsilon = 1e-12;
    o.max_epochs = 20000;
    const BinarySvmResult r = svm_train_binary(b.x, y, o);
    CHECK(r.converged);
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < b.x.rows(); ++i) rows.emplace_back(b.x.row(i).begin(), b.x.row(i).end());
    const auto [w, bias] = oracle::squared_hinge_svm(rows, std::vector<int>(y.begin(), y.end()), o.C);
    for (std::size_t d = 0; d < w.size(); ++d) CHECK(r.w[d] == doctest::Approx(w[d]).epsilon(1e-5));
    CHECK(r.bias == doctest::Approx(bias).epsilon(1e-5));
    CHECK(primal_of(b.x, y, o.C, r) <= oracle::squared_hinge_primal(rows, std::vector<int>(y.begin(), y.end()), o.C, w, bias) + 1e-9);
  }
}

TEST_CASE("duplicating every point equals doubling C") {
  const Blobs b = blobs(2, 30, 4, 1.5, 5);
  const auto y = signs(b.labels);
  RowMatrixF x2(b.x.rows() * 2, b.x.cols());
  x2 << b.x, b.x;
  std::vector<std::int8_t> y2 = y;
  y2.insert(y2.end(), y.begin(), y.end());
  SvmOptions o;
  o.epsilon = 1e-12;
  o.max_epochs = 50000;
  o.C = 1.0;
  const auto single = svm_train_binary(b.x, y, o);
  o.C = 0.5;
  const auto doubled = svm_train_binary(x2, y2, o);
  for (std::size_t d = 0; d < single.w.size(); ++d) CHECK(std::abs(single.w[d] - doubled.w[d]) < 1e-6);
  CHECK(std::abs(single.bias - doubled.bias) < 1e-6);
}

TEST_CASE("dual objective never increases and the gap closes") {
  const Blobs b = blobs(2, 200, 10, 1.5, 6);
  SvmOptions o;
  o.epsilon = 1e-8;
  const auto r = svm_train_binary(b.x, signs(b.labels), o);
  REQUIRE(r.dual_history.size() >= 2);
  for (std::size_t i = 1; i < r.dual_history.size(); ++i) CHECK(r.dual_history[i] <= r.dual_history[i - 1] + 1e-12);
  CHECK(r.converged);
  CHECK(r.primal >= -r.dual_history.back() - 1e-9);
}

TEST_CASE("three classes one-vs-rest") {
  const Blobs b = blobs(3, 60, 3, 0.4, 7);
  const LinearModel m = svm_train(b.x, b.labels, {"x", "y", "z"});
  CHECK(m.num_classes() == 3);
  CHECK(evaluate(m, b.x, b.labels).accuracy == 1.0);
  // At the origin only the biases speak.
  const std::vector<float> zero(3, 0.0f);
  const int expected = static_cast<int>(std::max_element(m.bias.begin(), m.bias.end()) - m.bias.begin());
  CHECK(predict(m, std::span<const float>(zero)) == expected);
  for (int c = 0; c < 3; ++c) {
    const Eigen::Index row = c * 60 + 5;
    CHECK(predict(m, std::span<const float>(b.x.data() + row * 3, 3)) == c);
  }
}

TEST_CASE("ties predict the lowest class") {
  LinearModel m;
  m.classes = {"a", "b", "c"};
  m.weights = RowMatrixD::Zero(3, 2);
  m.bias = {0.0, 1.0, 1.0};
  const std::vector<double> x{0.0, 0.0};
  CHECK(predict(m, std::span<const double>(x)) == 1);
  const std::vector<double> bad{0.0};
  CHECK_THROWS_AS(predict(m, std::span<const double>(bad)), std::invalid_argument);
}

TEST_CASE("reports") {
  const std::vector<int> t{0, 0, 1, 1};
  CHECK(make_report(t, t, {"a", "b"}).accuracy == 1.0);
  const std::vector<int> p{0, 1, 1, 1};
  const EvalReport r = make_report(t, p, {"a", "b"});
  CHECK(r.accuracy == 0.75);
  CHECK(r.class_accuracy == std::vector<double>{0.5, 1.0});
  CHECK(r.confusion[0][1] == 1);
  const auto j = r.to_json();
  CHECK(j.at("accuracy") == 0.75);
  CHECK(j.at("per_class").size() == 2);
  CHECK_THROWS_AS(make_report({}, {}, {"a"}), std::invalid_argument);
}

TEST_CASE("random labels stay at chance") {
  Rng rng(8);
  const int n = 10000, d = 20;
  RowMatrixF train(n, d), test(n, d);
  std::vector<int> ltrain(n), ltest(n);
  for (int i = 0; i < n; ++i) {
    ltrain[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(2));
    ltest[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(2));
    for (int k = 0; k < d; ++k) {
      train(i, k) = static_cast<float>(rng.normal());
      test(i, k) = static_cast<float>(rng.normal());
    }
  }
  const LinearModel m = svm_train(train, ltrain, {"a", "b"});
  const double acc = evaluate(m, test, ltest).accuracy;
  CHECK(acc >= 0.47);
  CHECK(acc <= 0.53);
}

TEST_CASE("zero padding adds zero weights and keeps the rest") {
  const Blobs b = blobs(2, 50, 4, 1.0, 9);
  RowMatrixF padded = RowMatrixF::Zero(b.x.rows(), 7);
  padded.leftCols(4) = b.x;
  SvmOptions o;
  o.epsilon = 1e-10;
  const auto y = signs(b.labels);
  const auto r = svm_train_binary(b.x, y, o);
  const auto rp = svm_train_binary(padded, y, o);
  for (int d = 0; d < 4; ++d) CHECK(std::abs(r.w[static_cast<std::size_t>(d)] - rp.w[static_cast<std::size_t>(d)]) < 1e-9);
  for (int d = 4; d < 7; ++d) CHECK(rp.w[static_cast<std::size_t>(d)] == 0.0);
}

TEST_CASE("deterministic under a seed, file round trip") {
  const Blobs b = blobs(3, 40, 6, 1.0, 10);
  SvmOptions o;
  o.seed = 77;
  const LinearModel m1 = svm_train(b.x, b.labels, {"a", "b", "c"}, o);
  const LinearModel m2 = svm_train(b.x, b.labels, {"a", "b", "c"}, o);
  CHECK(m1.weights == m2.weights);
  CHECK(m1.bias == m2.bias);
  // Model files hold float32 values.
  const LinearModel back = LinearModel::from_file(m1.to_file());
  CHECK(back.weights == m1.weights.cast<float>().cast<double>());
  for (std::size_t c = 0; c < 3; ++c) CHECK(back.bias[c] == static_cast<double>(static_cast<float>(m1.bias[c])));
  CHECK(back.classes == m1.classes);
  CHECK(back.C == m1.C);
}

TEST_CASE("argument checks") {
  const Blobs b = blobs(2, 5, 2, 1.0, 11);
  CHECK_THROWS_AS(svm_train(b.x, b.labels, {"a"}), std::invalid_argument);
  std::vector<int> one(b.labels.size(), 0);
  CHECK_THROWS_AS(svm_train(b.x, one, {"a", "b"}), std::invalid_argument);
  std::vector<int> out = b.labels;
  out[0] = 5;
  CHECK_THROWS_AS(svm_train(b.x, out, {"a", "b"}), std::invalid_argument);
  SvmOptions o;
  o.C = 0;
  CHECK_THROWS_AS(svm_train(b.x, b.labels, {"a", "b"}, o), std::invalid_argument);
  std::vector<std::int8_t> bad(b.labels.size(), 0);
  CHECK_THROWS_AS(svm_train_binary(b.x, bad), std::invalid_argument);
}
