#include "fgpart/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fgpart/errors.hpp"
#include "fgpart/kernels.hpp"
#include "fgpart/select.hpp"

namespace fgpart {

nlohmann::json FvLayout::to_json() const {
  return nlohmann::json{{"groups", groups},
                        {"components", components},
                        {"dims", dims},
                        {"order", "group, component, [mean(dims), std(dims)]"}};
}

FvLayout FvLayout::from_json(const nlohmann::json& j) {
  try {
    FvLayout l{j.at("groups").get<int>(), j.at("components").get<int>(), j.at("dims").get<int>()};
    if (l.groups < 1 || l.components < 1 || l.dims < 1) throw DataError("fv layout: non-positive extent");
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("fv layout: ") + e.what());
  }
}

// ---------------------------------------------------------------- accumulation

FisherAccumulator::FisherAccumulator(const GmmEvaluator& gmm, const EncodeOptions& options)
    : gmm_(&gmm),
      options_(options),
      acc_(2 * static_cast<std::size_t>(gmm.dims()) * gmm.components(), 0.0),
      gamma_(gmm.components()) {}

void FisherAccumulator::add(std::span<const double> x) {
  const auto p = static_cast<std::size_t>(gmm_->dims());
  if (x.size() != p) throw std::invalid_argument("fisher: descriptor length mismatch");
  gmm_->posteriors(x, gamma_);
  const auto& kt = simd::kernels();
  const GmmModel& m = gmm_->model();
  for (int c = 0; c < gmm_->components(); ++c) {
    const double g = gamma_[c];
    if (g == 0.0 || g < options_.gamma_threshold) continue;
    double* block = acc_.data() + static_cast<std::size_t>(c) * 2 * p;
    kt.fisher_accumulate(x.data(), m.means.data() + static_cast<std::size_t>(c) * p, gmm_->inv_std(c).data(), g,
                         block, block + p, p);
  }
  ++count_;
}

std::vector<double> FisherAccumulator::finish() const {
  std::vector<double> out = acc_;
  const auto p = static_cast<std::size_t>(gmm_->dims());
  const GmmModel& m = gmm_->model();
  for (int c = 0; c < gmm_->components(); ++c) {
    const double w = m.weights(c);
    const double sm = 1.0 / std::sqrt(w);
    const double ss = 1.0 / std::sqrt(2.0 * w);
    double* block = out.data() + static_cast<std::size_t>(c) * 2 * p;
    for (std::size_t d = 0; d < p; ++d) {
      block[d] *= sm;
      block[p + d] *= ss;
    }
  }
  return out;
}

std::vector<double> encode_group(std::span<const PartKey> keys, const RowMatrixD& descriptors, const GmmModel& model,
                                 const ScaleGrouping& grouping, int group, const EncodeOptions& options) {
  if (keys.size() != static_cast<std::size_t>(descriptors.rows())) {
    throw std::invalid_argument("encode_group: key count does not match descriptor count");
  }
  if (descriptors.rows() > 0 && descriptors.cols() != model.dims()) {
    throw std::invalid_argument("encode_group: descriptor dimension does not match the GMM");
  }
  for (const auto& k : keys) {
    if (k.scale < 1 || k.scale > grouping.scales() || grouping.group_of(k.scale) != group) {
      throw std::invalid_argument("encode_group: part at scale " + std::to_string(k.scale) + " is not in group " +
                                  std::to_string(group));
    }
  }
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    const double* ra = descriptors.data() + a * descriptors.cols();
    const double* rb = descriptors.data() + b * descriptors.cols();
    return std::lexicographical_compare(ra, ra + descriptors.cols(), rb, rb + descriptors.cols());
  });
  const GmmEvaluator ev(model);
  FisherAccumulator acc(ev, options);
  for (std::size_t i : order) acc.add(row_span(descriptors, static_cast<Eigen::Index>(i)));
  return acc.finish();
}

std::vector<double> encode_group(const RowMatrixD& descriptors, const GmmModel& model, const EncodeOptions& options) {
  if (descriptors.rows() > 0 && descriptors.cols() != model.dims()) {
    throw std::invalid_argument("encode_group: descriptor dimension does not match the GMM");
  }
  const GmmEvaluator ev(model);
  FisherAccumulator acc(ev, options);
  for (Eigen::Index i = 0; i < descriptors.rows(); ++i) acc.add(row_span(descriptors, i));
  return acc.finish();
}

// ---------------------------------------------------------------- normalization

void normalize_block(std::span<double> block) {
  double norm2 = 0.0;
  for (double& z : block) {
    z = std::copysign(std::sqrt(std::abs(z)), z);
    norm2 += z * z;
  }
  if (norm2 <= 0.0) {
    std::fill(block.begin(), block.end(), 0.0);
    return;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& z : block) z *= inv;
}

FisherVector normalize_and_concat(std::vector<std::vector<double>> blocks, const FvLayout& layout) {
  if (blocks.size() != static_cast<std::size_t>(layout.groups)) {
    throw std::invalid_argument("normalize_and_concat: block count does not match layout");
  }
  FisherVector fv;
  fv.layout = layout;
  fv.values.reserve(layout.size());
  for (auto& b : blocks) {
    if (b.size() != layout.block_size()) throw std::invalid_argument("normalize_and_concat: block length mismatch");
    normalize_block(b);
    fv.values.insert(fv.values.end(), b.begin(), b.end());
  }
  return fv;
}

FisherVector apply_mask(const FisherVector& fv, const SelectionMask& mask) {
  if (!fv.kept.empty()) throw std::invalid_argument("apply_mask: vector is already masked");
  if (!(mask.layout == fv.layout) || fv.values.size() != fv.layout.size()) {
    throw std::invalid_argument("apply_mask: mask layout does not match the vector");
  }
  FisherVector out;
  out.layout = fv.layout;
  out.kept = mask.kept_clusters();
  const std::size_t cs = fv.layout.cluster_size();
  out.values.reserve(out.kept.size() * cs);
  for (std::size_t c : out.kept) {
    const auto first = fv.values.begin() + static_cast<std::ptrdiff_t>(c * cs);
    out.values.insert(out.values.end(), first, first + static_cast<std::ptrdiff_t>(cs));
  }
  return out;
}

// ---------------------------------------------------------------- image encoding

void EncoderModels::validate() const {
  stack.validate();
  if (grouping.groups() < 1) throw DataError("encoder: empty scale grouping");
  if (gmms.size() != static_cast<std::size_t>(grouping.groups())) {
    throw DataError("encoder: " + std::to_string(gmms.size()) + " GMMs for " + std::to_string(grouping.groups()) +
                    " scale groups");
  }
  for (std::size_t j = 0; j < gmms.size(); ++j) {
    gmms[j].validate();
    if (gmms[j].dims() != pca.output_dims()) throw DataError("encoder: GMM dimension does not match PCA output");
    if (gmms[j].components() != gmms[0].components()) throw DataError("encoder: groups have different component counts");
  }
}

FvLayout EncoderModels::layout() const {
  return FvLayout{grouping.groups(), gmms.empty() ? 0 : gmms.front().components(), pca.output_dims()};
}

RowMatrixD reduce_parts(const PartSet& parts, const PcaModel& pca) {
  RowMatrixD out(static_cast<Eigen::Index>(parts.size()), pca.output_dims());
  for (std::size_t i = 0; i < parts.size(); ++i) pca.apply(parts.descriptor(i), row_span(out, static_cast<Eigen::Index>(i)));
  return out;
}

ImageEncoder::ImageEncoder(const EncoderModels& models, const EncodeOptions& options) : models_(&models) {
  models.validate();
  evaluators_.reserve(models.gmms.size());
  for (const auto& g : models.gmms) evaluators_.emplace_back(g);
  accumulators_.reserve(evaluators_.size());
  for (const auto& ev : evaluators_) accumulators_.emplace_back(ev, options);
}

void ImageEncoder::add_proposal(const ProposalRecord& proposal) {
  if (proposal.channels != models_->pca.input_dims()) {
    throw DataError("encoder: proposal has " + std::to_string(proposal.channels) + " channels, PCA expects " +
                    std::to_string(models_->pca.input_dims()));
  }
  if (proposal.grid > models_->grouping.scales()) {
    throw DataError("encoder: proposal grid " + std::to_string(proposal.grid) + " exceeds the grouping's " +
                    std::to_string(models_->grouping.scales()) + " scales");
  }
  const PartSet parts = multi_max_pool(proposal, models_->stack);
  std::vector<double> reduced(static_cast<std::size_t>(models_->pca.output_dims()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    models_->pca.apply(parts.descriptor(i), reduced);
    accumulators_[models_->grouping.group_of(parts.parts[i].scale)].add(reduced);
  }
}

FisherVector ImageEncoder::finish(const SelectionMask* mask) const {
  std::vector<std::vector<double>> blocks;
  blocks.reserve(accumulators_.size());
  for (const auto& a : accumulators_) blocks.push_back(a.finish());
  FisherVector fv = normalize_and_concat(std::move(blocks), models_->layout());
  return mask ? apply_mask(fv, *mask) : fv;
}

FisherVector encode_image(const ImageRecord& record, const EncoderModels& models, const SelectionMask* mask,
                          const EncodeOptions& options) {
  ImageEncoder enc(models, options);
  for (const auto& p : record.proposals) enc.add_proposal(p);
  return enc.finish(mask);
}

}  // namespace fgpart
