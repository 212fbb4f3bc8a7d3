#include "fgpart/keypart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fgpart/errors.hpp"
#include "fgpart/parallel.hpp"
#include "fgpart/rng.hpp"

namespace fgpart {

ReducedImage reduce_image(const ImageRecord& record, const EncoderModels& models) {
  models.validate();
  std::vector<GmmEvaluator> evaluators;
  evaluators.reserve(models.gmms.size());
  for (const auto& g : models.gmms) evaluators.emplace_back(g);
  const int K = models.gmms.front().components();

  ReducedImage out;
  out.image_id = record.image_id;
  out.label = record.label;
  out.split = record.split;
  for (std::size_t pi = 0; pi < record.proposals.size(); ++pi) {
    const auto& prop = record.proposals[pi];
    if (prop.channels != models.pca.input_dims()) throw DataError("keypart: channel count does not match PCA");
    if (prop.grid > models.grouping.scales()) throw DataError("keypart: proposal grid exceeds the grouping");
    const PartSet parts = multi_max_pool(prop, models.stack);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      ReducedPart rp;
      rp.proposal = static_cast<std::uint32_t>(pi);
      rp.info = parts.parts[i];
      rp.group = models.grouping.group_of(rp.info.scale);
      rp.x.resize(static_cast<std::size_t>(models.pca.output_dims()));
      models.pca.apply(parts.descriptor(i), rp.x);
      rp.component = evaluators[static_cast<std::size_t>(rp.group)].assign(rp.x);
      rp.cluster = static_cast<std::size_t>(rp.group) * static_cast<std::size_t>(K) + static_cast<std::size_t>(rp.component);
      out.parts.push_back(std::move(rp));
    }
  }
  return out;
}

std::vector<double> aggregate_cluster_feature(std::span<const std::vector<double>> parts, std::span<const double> center) {
  std::vector<double> v(center.size(), 0.0);
  for (const auto& x : parts) {
    if (x.size() != center.size()) throw std::invalid_argument("aggregate_cluster_feature: dimension mismatch");
    for (std::size_t d = 0; d < v.size(); ++d) v[d] += x[d] - center[d];
  }
  double n2 = 0.0;
  for (double z : v) n2 += z * z;
  if (n2 > 0.0) {
    const double inv = 1.0 / std::sqrt(n2);
    for (double& z : v) z *= inv;
  }
  return v;
}

const ClusterScorer* PartScorerSet::find(std::size_t cluster) const {
  auto it = std::lower_bound(scorers.begin(), scorers.end(), cluster,
                             [](const ClusterScorer& s, std::size_t c) { return s.cluster < c; });
  return it != scorers.end() && it->cluster == cluster ? &*it : nullptr;
}

RowMatrixF cluster_aggregates(const ReducedImage& image, std::span<const std::size_t> kept, const EncoderModels& models) {
  const auto p = static_cast<std::size_t>(models.pca.output_dims());
  std::vector<std::vector<double>> sums(kept.size(), std::vector<double>(p, 0.0));
  for (const auto& part : image.parts) {
    auto it = std::lower_bound(kept.begin(), kept.end(), part.cluster);
    if (it == kept.end() || *it != part.cluster) continue;
    const auto& mean = models.gmms[static_cast<std::size_t>(part.group)].means;
    auto& s = sums[static_cast<std::size_t>(it - kept.begin())];
    for (std::size_t d = 0; d < p; ++d) s[d] += part.x[d] - mean(part.component, static_cast<Eigen::Index>(d));
  }
  RowMatrixF out(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(p));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    double n2 = 0.0;
    for (double z : sums[c]) n2 += z * z;
    const double inv = n2 > 0.0 ? 1.0 / std::sqrt(n2) : 0.0;
    for (std::size_t d = 0; d < p; ++d) out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d)) = static_cast<float>(sums[c][d] * inv);
  }
  return out;
}

PartScorerSet train_scorers_from_aggregates(std::span<const RowMatrixF> aggregates, std::span<const std::int8_t> y,
                                            int class_a, int class_b, std::span<const std::size_t> kept,
                                            const EncoderModels& models, const SvmOptions& options) {
  if (class_a == class_b) throw std::invalid_argument("keypart: the two classes must differ");
  if (aggregates.size() != y.size()) throw std::invalid_argument("keypart: aggregate/label count mismatch");
  if (std::find(y.begin(), y.end(), 1) == y.end()) {
    throw DataError("keypart: class " + std::to_string(class_a) + " has no training image");
  }
  if (std::find(y.begin(), y.end(), -1) == y.end()) {
    throw DataError("keypart: class " + std::to_string(class_b) + " has no training image");
  }
  if (!std::is_sorted(kept.begin(), kept.end())) throw std::invalid_argument("keypart: kept clusters must be ascending");
  const FvLayout layout = models.layout();
  const auto p = static_cast<std::size_t>(layout.dims);

  PartScorerSet set;
  set.class_a = class_a;
  set.class_b = class_b;
  set.components = layout.components;
  set.scorers.resize(kept.size());
  parallel_for(kept.size(), [&](std::size_t s) {
    const std::size_t cluster = kept[s];
    const auto K = static_cast<std::size_t>(layout.components);
    const GmmModel& gmm = models.gmms[cluster / K];
    const auto comp = static_cast<Eigen::Index>(cluster % K);
    ClusterScorer& sc = set.scorers[s];
    sc.cluster = cluster;
    sc.center.resize(p);
    for (std::size_t d = 0; d < p; ++d) sc.center[d] = gmm.means(comp, static_cast<Eigen::Index>(d));

    RowMatrixF x(static_cast<Eigen::Index>(aggregates.size()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < aggregates.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = aggregates[i].row(static_cast<Eigen::Index>(s));
    SvmOptions o = options;
    o.seed = derive_seed(options.seed, cluster);
    sc.w = svm_train_binary(x, y, o).w;
  });
  return set;
}

PartScorerSet train_pair_scorers(std::span<const ReducedImage> images, int class_a, int class_b,
                                 const SelectionMask& mask, const EncoderModels& models, const SvmOptions& options) {
  if (!(mask.layout == models.layout())) throw DataError("keypart: selection mask does not match the encoder models");
  const auto kept = mask.kept_clusters();
  std::vector<RowMatrixF> aggregates;
  std::vector<std::int8_t> y;
  for (const auto& im : images) {
    if (im.split != Split::Train || (im.label != class_a && im.label != class_b)) continue;
    aggregates.push_back(cluster_aggregates(im, kept, models));
    y.push_back(im.label == class_a ? 1 : -1);
  }
  return train_scorers_from_aggregates(aggregates, y, class_a, class_b, kept, models, options);
}

std::vector<ScoredPart> score_parts(const ReducedImage& image, const PartScorerSet& scorers) {
  std::vector<ScoredPart> out;
  for (const auto& part : image.parts) {
    const ClusterScorer* sc = scorers.find(part.cluster);
    if (!sc) continue;
    if (part.x.size() != sc->w.size()) throw DataError("keypart: descriptor length does not match scorer");
    double s = 0.0;
    for (std::size_t d = 0; d < sc->w.size(); ++d) s += sc->w[d] * (part.x[d] - sc->center[d]);
    out.push_back(ScoredPart{image.image_id, part.proposal, part.info.scale, part.info.row, part.info.col, part.info.box,
                             part.cluster, s});
  }
  return out;
}

namespace {

bool tie_less(const ScoredPart& a, const ScoredPart& b) {
  if (a.image_id != b.image_id) return a.image_id < b.image_id;
  if (a.scale != b.scale) return a.scale < b.scale;
  if (a.row != b.row) return a.row < b.row;
  if (a.col != b.col) return a.col < b.col;
  return a.proposal < b.proposal;
}

std::vector<ScoredPart> pick(std::span<const ScoredPart> parts, std::size_t k, double nms_iou, bool descending) {
  std::vector<std::size_t> order(parts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto& a = parts[i];
    const auto& b = parts[j];
    if (a.score != b.score) return descending ? a.score > b.score : a.score < b.score;
    return tie_less(a, b);
  });
  std::vector<ScoredPart> chosen;
  for (std::size_t i : order) {
    if (chosen.size() >= k) break;
    const auto& c = parts[i];
    const bool suppressed = std::any_of(chosen.begin(), chosen.end(), [&](const ScoredPart& o) {
      return o.image_id == c.image_id && iou(o.box, c.box) > nms_iou;
    });
    if (!suppressed) chosen.push_back(c);
  }
  return chosen;
}

nlohmann::json part_json(const ScoredPart& p, int components) {
  nlohmann::json j{{"image_id", p.image_id}, {"score", p.score},   {"cluster", p.cluster}, {"proposal", p.proposal},
                   {"scale", p.scale},       {"row", p.row},       {"col", p.col},
                   {"box", {p.box.x0, p.box.y0, p.box.x1, p.box.y1}}};
  if (components > 0) {
    j["group"] = p.cluster / static_cast<std::size_t>(components);
    j["component"] = p.cluster % static_cast<std::size_t>(components);
  }
  return j;
}

}  // namespace

KeyPartReport top_parts_report(std::span<const ScoredPart> parts, std::size_t k, double nms_iou) {
  if (k < 1) throw std::invalid_argument("top_parts_report: k must be >= 1");
  KeyPartReport r;
  r.k = k;
  r.nms_iou = nms_iou;
  r.top = pick(parts, k, nms_iou, true);
  r.bottom = pick(parts, k, nms_iou, false);
  return r;
}

nlohmann::json KeyPartReport::to_json(const std::vector<std::string>& class_names, int components) const {
  auto name = [&](int c) -> nlohmann::json {
    if (c >= 0 && static_cast<std::size_t>(c) < class_names.size()) return class_names[static_cast<std::size_t>(c)];
    return c;
  };
  nlohmann::json top_j = nlohmann::json::array(), bottom_j = nlohmann::json::array();
  for (const auto& p : top) top_j.push_back(part_json(p, components));
  for (const auto& p : bottom) bottom_j.push_back(part_json(p, components));
  return nlohmann::json{{"positive_class", {{"index", class_a}, {"name", name(class_a)}}},
                        {"negative_class", {{"index", class_b}, {"name", name(class_b)}}},
                        {"k", k},
                        {"nms_iou", nms_iou},
                        {"top", top_j},
                        {"bottom", bottom_j}};
}

ModelFile PartScorerSet::to_file() const {
  ModelFile f;
  f.kind = "part-scorers";
  f.meta["class_a"] = class_a;
  f.meta["class_b"] = class_b;
  f.meta["components"] = components;
  std::vector<std::size_t> ids;
  std::vector<double> centers, weights;
  for (const auto& s : scorers) {
    ids.push_back(s.cluster);
    centers.insert(centers.end(), s.center.begin(), s.center.end());
    weights.insert(weights.end(), s.w.begin(), s.w.end());
  }
  const std::size_t p = scorers.empty() ? 0 : scorers.front().w.size();
  f.meta["clusters"] = ids;
  f.meta["dims"] = p;
  f.add("centers", {scorers.size(), p}, std::span<const double>(centers));
  f.add("weights", {scorers.size(), p}, std::span<const double>(weights));
  return f;
}

PartScorerSet PartScorerSet::from_file(const ModelFile& f) {
  try {
    PartScorerSet s;
    s.class_a = f.meta.at("class_a").get<int>();
    s.class_b = f.meta.at("class_b").get<int>();
    s.components = f.meta.at("components").get<int>();
    const auto ids = f.meta.at("clusters").get<std::vector<std::size_t>>();
    const auto p = f.meta.at("dims").get<std::size_t>();
    const auto centers = f.doubles("centers", ids.size() * p);
    const auto weights = f.doubles("weights", ids.size() * p);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i > 0 && ids[i] <= ids[i - 1]) throw DataError("part scorers: cluster ids not ascending");
      s.scorers.push_back(ClusterScorer{ids[i], {centers.begin() + i * p, centers.begin() + (i + 1) * p},
                                        {weights.begin() + i * p, weights.begin() + (i + 1) * p}});
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("part scorers: ") + e.what());
  }
}

}  // namespace fgpart
