#include "fgpart/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "fgpart/errors.hpp"
#include "fgpart/kernels.hpp"
#include "fgpart/rng.hpp"

namespace fgpart {

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k >= n) return idx;
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

PcaModel pca_fit(const RowMatrixF& sample, int p, const PcaOptions& options) {
  const Eigen::Index d = sample.cols();
  if (p < 1) throw std::invalid_argument("pca_fit: target dimension must be >= 1");
  if (p > d) throw std::invalid_argument("pca_fit: target dimension exceeds descriptor dimension");

  std::vector<std::size_t> rows;
  if (options.max_samples != 0 && static_cast<std::size_t>(sample.rows()) > options.max_samples) {
    rows = sample_indices(static_cast<std::size_t>(sample.rows()), options.max_samples, options.seed);
  } else {
    rows.resize(static_cast<std::size_t>(sample.rows()));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  if (rows.size() < static_cast<std::size_t>(p)) {
    throw std::invalid_argument("pca_fit: sample too small (" + std::to_string(rows.size()) + " rows for " +
                                std::to_string(p) + " components)");
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  RowMatrixD x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = sample.row(static_cast<Eigen::Index>(rows[i])).cast<double>();

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  x.rowwise() -= model.mean.transpose();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw DataError("pca_fit: eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = eig.eigenvectors();

  const double top = std::max(values(d - 1), 0.0);
  const double tol = top * 1e-10 * static_cast<double>(d);

  model.basis = RowMatrixD::Zero(p, d);
  model.explained_variance = Eigen::VectorXd::Zero(p);
  model.effective_rank = 0;
  for (int k = 0; k < p; ++k) {
    const Eigen::Index src = d - 1 - k;
    const double lambda = values(src);
    if (!(lambda > tol) || top <= 0.0) break;
    Eigen::VectorXd v = vectors.col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    model.basis.row(k) = v.transpose();
    model.explained_variance(k) = lambda;
    ++model.effective_rank;
  }
  return model;
}

void PcaModel::apply(std::span<const float> x, std::span<double> out) const {
  const auto d = static_cast<std::size_t>(mean.size());
  if (x.size() != d) throw std::invalid_argument("pca_apply: input length mismatch");
  if (out.size() != static_cast<std::size_t>(basis.rows())) throw std::invalid_argument("pca_apply: output length mismatch");
  thread_local std::vector<double> centered;
  centered.resize(d);
  for (std::size_t i = 0; i < d; ++i) centered[i] = static_cast<double>(x[i]) - mean[static_cast<Eigen::Index>(i)];
  const auto& k = simd::kernels();
  for (Eigen::Index r = 0; r < basis.rows(); ++r) out[r] = k.dot_dd(basis.data() + r * basis.cols(), centered.data(), d);
}

std::vector<double> PcaModel::apply(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(mean.size())) throw std::invalid_argument("pca_apply: input length mismatch");
  std::vector<double> centered(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - mean[static_cast<Eigen::Index>(i)];
  std::vector<double> out(static_cast<std::size_t>(basis.rows()));
  const auto& k = simd::kernels();
  for (Eigen::Index r = 0; r < basis.rows(); ++r) {
    out[r] = k.dot_dd(basis.data() + r * basis.cols(), centered.data(), centered.size());
  }
  return out;
}

ModelFile PcaModel::to_file() const {
  ModelFile f;
  f.kind = "pca";
  const auto d = static_cast<std::size_t>(input_dims());
  const auto p = static_cast<std::size_t>(output_dims());
  f.meta["input_dims"] = d;
  f.meta["output_dims"] = p;
  f.meta["effective_rank"] = effective_rank;
  f.add("mean", {d}, std::span<const double>(mean.data(), d));
  f.add("basis", {p, d}, std::span<const double>(basis.data(), p * d));
  f.add("explained_variance", {p}, std::span<const double>(explained_variance.data(), p));
  return f;
}

PcaModel PcaModel::from_file(const ModelFile& f) {
  if (f.kind != "pca") throw DataError("expected a pca model, found '" + f.kind + "'");
  PcaModel m;
  const auto d = f.meta.at("input_dims").get<std::size_t>();
  const auto p = f.meta.at("output_dims").get<std::size_t>();
  m.effective_rank = f.meta.at("effective_rank").get<int>();
  const auto mean = f.doubles("mean", d);
  const auto basis = f.doubles("basis", p * d);
  const auto var = f.doubles("explained_variance", p);
  m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(d));
  m.basis = Eigen::Map<const RowMatrixD>(basis.data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(d));
  m.explained_variance = Eigen::Map<const Eigen::VectorXd>(var.data(), static_cast<Eigen::Index>(p));
  return m;
}

}  // namespace fgpart
