#pragma once

// Small hand-built models for tests that should not depend on fitting.

#include "fgpart/fisher.hpp"
#include "fgpart/rng.hpp"
#include "oracles.hpp"

namespace testutil {

inline fgpart::GmmModel random_gmm(int K, int p, fgpart::Rng& rng, int group = 0) {
  fgpart::GmmModel m;
  m.group = group;
  m.weights.resize(K);
  m.means.resize(K, p);
  m.stds.resize(K, p);
  for (int k = 0; k < K; ++k) {
    m.weights(k) = 0.2 + rng.uniform();
    for (int d = 0; d < p; ++d) {
      m.means(k, d) = 2.0 * rng.normal();
      m.stds(k, d) = 0.5 + rng.uniform();
    }
  }
  m.weights /= m.weights.sum();
  return m;
}

inline oracle::Mixture to_mixture(const fgpart::GmmModel& m) {
  oracle::Mixture o;
  for (int k = 0; k < m.components(); ++k) {
    o.w.push_back(m.weights(k));
    o.mu.emplace_back(m.means.row(k).begin(), m.means.row(k).end());
    o.sigma.emplace_back(m.stds.row(k).begin(), m.stds.row(k).end());
  }
  return o;
}

/// Identity PCA (channels == p) and random GMMs for every group.
inline fgpart::EncoderModels identity_models(int channels, int K, const fgpart::ScaleGrouping& grouping,
                                             const fgpart::LayerStack& stack, std::uint64_t seed) {
  fgpart::Rng rng(seed);
  fgpart::EncoderModels m;
  m.stack = stack;
  m.grouping = grouping;
  m.pca.mean = Eigen::VectorXd::Zero(channels);
  m.pca.basis = fgpart::RowMatrixD::Identity(channels, channels);
  m.pca.explained_variance = Eigen::VectorXd::Ones(channels);
  m.pca.effective_rank = channels;
  for (int g = 0; g < grouping.groups(); ++g) m.gmms.push_back(random_gmm(K, channels, rng, g));
  return m;
}

inline fgpart::ProposalRecord random_proposal(int grid, int channels, fgpart::Rng& rng, fgpart::Box box) {
  fgpart::ProposalRecord p;
  p.box = box;
  p.grid = grid;
  p.channels = channels;
  p.values.resize(static_cast<std::size_t>(grid) * grid * channels);
  for (float& v : p.values) v = static_cast<float>(rng.normal());
  return p;
}

}  // namespace testutil
