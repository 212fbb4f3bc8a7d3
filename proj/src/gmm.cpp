#include "fgpart/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "fgpart/errors.hpp"
#include "fgpart/kernels.hpp"
#include "fgpart/parallel.hpp"
#include "fgpart/rng.hpp"

namespace fgpart {

// ---------------------------------------------------------------- model

void GmmModel::validate() const {
  const Eigen::Index k = weights.size();
  if (k < 1) throw DataError("gmm: no components");
  if (means.rows() != k || stds.rows() != k || stds.cols() != means.cols() || means.cols() < 1) {
    throw DataError("gmm: inconsistent parameter shapes");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-9) throw DataError("gmm: weights do not sum to 1");
  if ((weights.array() <= 0.0).any()) throw DataError("gmm: non-positive weight");
  if (!(stds.array() > 0.0).all() || !stds.allFinite() || !means.allFinite()) throw DataError("gmm: invalid std or mean");
}

ModelFile GmmModel::to_file() const {
  ModelFile f;
  f.kind = "gmm";
  const auto k = static_cast<std::size_t>(components());
  const auto p = static_cast<std::size_t>(dims());
  f.meta["group"] = group;
  f.meta["components"] = k;
  f.meta["dims"] = p;
  f.add("weights", {k}, std::span<const double>(weights.data(), k));
  f.add("means", {k, p}, std::span<const double>(means.data(), k * p));
  f.add("stds", {k, p}, std::span<const double>(stds.data(), k * p));
  return f;
}

GmmModel GmmModel::from_file(const ModelFile& f) {
  if (f.kind != "gmm") throw DataError("expected a gmm model, found '" + f.kind + "'");
  const auto k = f.meta.at("components").get<std::size_t>();
  const auto p = f.meta.at("dims").get<std::size_t>();
  GmmModel m;
  m.group = f.meta.at("group").get<int>();
  const auto w = f.doubles("weights", k);
  const auto mu = f.doubles("means", k * p);
  const auto sd = f.doubles("stds", k * p);
  m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(k));
  m.weights /= m.weights.sum();
  m.means = Eigen::Map<const RowMatrixD>(mu.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
  m.stds = Eigen::Map<const RowMatrixD>(sd.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
  m.validate();
  return m;
}

// ---------------------------------------------------------------- evaluation

GmmEvaluator::GmmEvaluator(const GmmModel& model) : model_(model) {
  const int k = model.components();
  const int p = model.dims();
  inv_std_.resize(static_cast<std::size_t>(k) * p);
  log_norm_.resize(k);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (int c = 0; c < k; ++c) {
    double log_det = 0.0;
    for (int d = 0; d < p; ++d) {
      const double s = model.stds(c, d);
      inv_std_[static_cast<std::size_t>(c) * p + d] = 1.0 / s;
      log_det += std::log(s);
    }
    log_norm_[c] = std::log(model.weights(c)) - log_det - half_log_2pi * p;
  }
}

void GmmEvaluator::log_joint(std::span<const double> x, std::span<double> out) const {
  const auto p = static_cast<std::size_t>(dims());
  if (x.size() != p) throw std::invalid_argument("gmm: descriptor length mismatch");
  const auto& kt = simd::kernels();
  for (int c = 0; c < components(); ++c) {
    const double q = kt.scaled_sq_dist(x.data(), model_.means.data() + static_cast<std::size_t>(c) * p,
                                       inv_std_.data() + static_cast<std::size_t>(c) * p, p);
    out[c] = log_norm_[c] - 0.5 * q;
  }
}

double GmmEvaluator::posteriors(std::span<const double> x, std::span<double> out) const {
  log_joint(x, out);
  const int k = components();
  double top = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) top = std::max(top, out[c]);
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    out[c] = std::exp(out[c] - top);
    total += out[c];
  }
  for (int c = 0; c < k; ++c) out[c] /= total;
  return top + std::log(total);
}

int GmmEvaluator::assign(std::span<const double> x) const {
  thread_local std::vector<double> lj;
  lj.resize(components());
  log_joint(x, lj);
  return static_cast<int>(std::max_element(lj.begin(), lj.end()) - lj.begin());
}

std::vector<double> posteriors(const GmmModel& model, std::span<const double> x) {
  GmmEvaluator ev(model);
  std::vector<double> out(model.components());
  ev.posteriors(x, out);
  return out;
}

// ---------------------------------------------------------------- fitting

namespace {

struct ChunkStats {
  std::vector<double> mass;  // K
  std::vector<double> s1;    // K x p, sum of gamma * (x - shift)
  std::vector<double> s2;    // K x p, sum of gamma * (x - shift)^2
  double log_likelihood = 0.0;
};

RowMatrixD canonical_order(const RowMatrixD& sample) {
  std::vector<Eigen::Index> order(sample.rows());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Eigen::Index p = sample.cols();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double* ra = sample.data() + a * p;
    const double* rb = sample.data() + b * p;
    return std::lexicographical_compare(ra, ra + p, rb, rb + p);
  });
  RowMatrixD out(sample.rows(), p);
  for (Eigen::Index i = 0; i < sample.rows(); ++i) out.row(i) = sample.row(order[i]);
  return out;
}

double sq_euclid(const double* a, const double* b, Eigen::Index p) {
  double s = 0.0;
  for (Eigen::Index d = 0; d < p; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

/// k-means++ seeding; returns indices of the chosen rows.
std::vector<Eigen::Index> kmeanspp(const RowMatrixD& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  std::vector<Eigen::Index> centers;
  centers.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    const double* c = x.data() + centers.back() * p;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], sq_euclid(x.data() + i * p, c, p));
      total += dist[i];
    }
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += dist[i];
        if (acc > target && dist[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.push_back(pick);
  }
  return centers;
}

}  // namespace

GmmFitResult gmm_fit(const RowMatrixD& sample, int k, const GmmOptions& options) {
  if (k < 1) throw std::invalid_argument("gmm_fit: component count must be >= 1");
  if (sample.rows() < 10 * static_cast<Eigen::Index>(k)) {
    throw std::invalid_argument("gmm_fit: sample too small (" + std::to_string(sample.rows()) + " rows for " +
                                std::to_string(k) + " components; need >= 10 K)");
  }
  if (sample.cols() < 1) throw std::invalid_argument("gmm_fit: zero-dimensional sample");
  if (!sample.allFinite()) throw std::invalid_argument("gmm_fit: non-finite sample values");

  const RowMatrixD x = canonical_order(sample);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const auto pz = static_cast<std::size_t>(p);

  const Eigen::RowVectorXd global_mean = x.colwise().mean();
  const Eigen::RowVectorXd global_var = (x.rowwise() - global_mean).array().square().colwise().mean();
  Eigen::RowVectorXd var_floor(p);
  for (Eigen::Index d = 0; d < p; ++d) var_floor(d) = std::max(options.variance_floor_ratio * global_var(d), 1e-12);

  GmmModel model;
  model.weights.resize(k);
  model.means.resize(k, p);
  model.stds.resize(k, p);

  // k-means++ centers, then one hard assignment to initialize all parameters.
  Rng rng(options.seed);
  const auto centers = kmeanspp(x, k, rng);
  {
    std::vector<double> count(k, 0.0);
    RowMatrixD sum = RowMatrixD::Zero(k, p);
    RowMatrixD sumsq = RowMatrixD::Zero(k, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double dd = sq_euclid(x.data() + i * p, x.data() + centers[c] * p, p);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      count[best] += 1.0;
      const Eigen::RowVectorXd diff = x.row(i) - x.row(centers[best]);
      sum.row(best) += diff;
      sumsq.row(best) += diff.array().square().matrix();
    }
    for (int c = 0; c < k; ++c) {
      const double m = std::max(count[c], 1.0);
      const Eigen::RowVectorXd shift = sum.row(c) / m;
      model.means.row(c) = x.row(centers[c]) + shift;
      Eigen::RowVectorXd var = (sumsq.row(c) / m).array() - shift.array().square();
      if (count[c] < 2.0) var = global_var;
      model.stds.row(c) = var.cwiseMax(var_floor).cwiseSqrt();
      model.weights(c) = m;
    }
    model.weights /= model.weights.sum();
  }

  GmmFitResult result;
  const std::size_t chunk = std::max<std::size_t>(options.chunk_size, 1);
  const std::size_t chunks = (static_cast<std::size_t>(n) + chunk - 1) / chunk;
  std::vector<ChunkStats> stats(chunks);
  const double empty_mass = 1e-10 * static_cast<double>(n);

  for (int iter = 0;; ++iter) {
    // E-step over fixed chunks; each chunk owns its statistics slot.
    const GmmEvaluator ev(model);
    parallel_for(chunks, [&](std::size_t ci) {
      ChunkStats& st = stats[ci];
      st.mass.assign(k, 0.0);
      st.s1.assign(static_cast<std::size_t>(k) * pz, 0.0);
      st.s2.assign(static_cast<std::size_t>(k) * pz, 0.0);
      st.log_likelihood = 0.0;
      std::vector<double> gamma(k);
      const std::size_t lo = ci * chunk;
      const std::size_t hi = std::min(lo + chunk, static_cast<std::size_t>(n));
      for (std::size_t i = lo; i < hi; ++i) {
        std::span<const double> xi(x.data() + i * pz, pz);
        st.log_likelihood += ev.posteriors(xi, gamma);
        for (int c = 0; c < k; ++c) {
          const double g = gamma[c];
          if (g == 0.0) continue;
          st.mass[c] += g;
          const double* mu = model.means.data() + static_cast<std::size_t>(c) * pz;
          double* s1 = st.s1.data() + static_cast<std::size_t>(c) * pz;
          double* s2 = st.s2.data() + static_cast<std::size_t>(c) * pz;
          for (std::size_t d = 0; d < pz; ++d) {
            const double diff = xi[d] - mu[d];
            s1[d] += g * diff;
            s2[d] += g * diff * diff;
          }
        }
      }
    });
    std::vector<double> mass(k, 0.0);
    std::vector<double> s1(static_cast<std::size_t>(k) * pz, 0.0);
    std::vector<double> s2(static_cast<std::size_t>(k) * pz, 0.0);
    double ll = 0.0;
    for (const auto& st : stats) {
      ll += st.log_likelihood;
      for (int c = 0; c < k; ++c) mass[c] += st.mass[c];
      for (std::size_t t = 0; t < s1.size(); ++t) {
        s1[t] += st.s1[t];
        s2[t] += st.s2[t];
      }
    }
    ll /= static_cast<double>(n);
    result.log_likelihood.push_back(ll);

    if (iter > 0) {
      const double prev = result.log_likelihood[result.log_likelihood.size() - 2];
      if (ll - prev < options.tolerance * std::abs(prev)) {
        result.converged = true;
        break;
      }
    }
    if (iter >= options.max_iterations) break;

    // M-step; statistics are centered on the previous means.
    std::vector<int> empty;
    for (int c = 0; c < k; ++c) {
      if (!(mass[c] > empty_mass)) {
        empty.push_back(c);
        continue;
      }
      for (std::size_t d = 0; d < pz; ++d) {
        const double m1 = s1[static_cast<std::size_t>(c) * pz + d] / mass[c];
        const double m2 = s2[static_cast<std::size_t>(c) * pz + d] / mass[c];
        const auto dd = static_cast<Eigen::Index>(d);
        model.means(c, dd) += m1;
        model.stds(c, dd) = std::sqrt(std::max(m2 - m1 * m1, var_floor(dd)));
      }
      model.weights(c) = mass[c] / static_cast<double>(n);
    }
    if (!empty.empty()) {
      std::vector<bool> live(k, true);
      for (int c : empty) live[c] = false;
      for (int c : empty) {
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          double nearest = std::numeric_limits<double>::infinity();
          for (int j = 0; j < k; ++j) {
            if (!live[j]) continue;
            double q = 0.0;
            for (Eigen::Index d = 0; d < p; ++d) {
              const double z = (x(i, d) - model.means(j, d)) / model.stds(j, d);
              q += z * z;
            }
            nearest = std::min(nearest, q);
          }
          if (nearest > far_d) {
            far_d = nearest;
            far = i;
          }
        }
        model.means.row(c) = x.row(far);
        model.stds.row(c) = global_var.cwiseMax(var_floor).cwiseSqrt();
        model.weights(c) = 1.0 / static_cast<double>(n);
        live[c] = true;
        ++result.reseeds;
      }
    }
    model.weights /= model.weights.sum();
    result.iterations = iter + 1;
  }
  result.model = std::move(model);
  return result;
}

}  // namespace fgpart
