#include "fgpart/select.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "fgpart/errors.hpp"
#include "fgpart/parallel.hpp"

namespace fgpart {

std::vector<int> equal_frequency_bins(std::span<const float> values, int bins) {
  if (bins < 1) throw std::invalid_argument("equal_frequency_bins: bins must be >= 1");
  const std::size_t n = values.size();
  std::vector<float> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<float> cuts;
  for (int k = 1; k < bins && n > 0; ++k) {
    const std::size_t at = std::min(n - 1, static_cast<std::size_t>(k) * n / static_cast<std::size_t>(bins));
    cuts.push_back(sorted[at]);
  }
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), values[i]) - cuts.begin());
  }
  return out;
}

double mutual_information(std::span<const int> bins, std::span<const int> labels, double pseudo_count) {
  if (bins.size() != labels.size()) throw std::invalid_argument("mutual_information: length mismatch");
  if (bins.empty()) return 0.0;
  // Dense re-indexing of the occupied bins and the labels.
  std::vector<int> bin_ids(bins.begin(), bins.end());
  std::sort(bin_ids.begin(), bin_ids.end());
  bin_ids.erase(std::unique(bin_ids.begin(), bin_ids.end()), bin_ids.end());
  std::vector<int> label_ids(labels.begin(), labels.end());
  std::sort(label_ids.begin(), label_ids.end());
  label_ids.erase(std::unique(label_ids.begin(), label_ids.end()), label_ids.end());
  const std::size_t nb = bin_ids.size();
  const std::size_t nl = label_ids.size();

  std::vector<double> joint(nb * nl, pseudo_count);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const auto b = static_cast<std::size_t>(std::lower_bound(bin_ids.begin(), bin_ids.end(), bins[i]) - bin_ids.begin());
    const auto l =
        static_cast<std::size_t>(std::lower_bound(label_ids.begin(), label_ids.end(), labels[i]) - label_ids.begin());
    joint[b * nl + l] += 1.0;
  }
  const double total = std::accumulate(joint.begin(), joint.end(), 0.0);
  std::vector<double> pb(nb, 0.0), pl(nl, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t l = 0; l < nl; ++l) {
      pb[b] += joint[b * nl + l];
      pl[l] += joint[b * nl + l];
    }
  }
  double mi = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t l = 0; l < nl; ++l) {
      const double c = joint[b * nl + l];
      if (c <= 0.0) continue;
      mi += (c / total) * std::log(c * total / (pb[b] * pl[l]));
    }
  }
  return std::max(mi, 0.0);
}

std::vector<double> mi_per_dimension(const RowMatrixF& x, std::span<const int> labels, const MiOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw std::invalid_argument("mi_per_dimension: " + std::to_string(x.rows()) + " rows but " +
                                std::to_string(labels.size()) + " labels");
  }
  std::map<int, std::size_t> per_class;
  for (int l : labels) ++per_class[l];
  if (per_class.size() < 2) throw std::invalid_argument("mi_per_dimension: need at least two classes");
  if (options.warnings) {
    for (const auto& [label, count] : per_class) {
      if (count < 2) {
        options.warnings->push_back("class " + std::to_string(label) + " has only " + std::to_string(count) +
                                    " sample(s); MI estimates will be noisy");
      }
    }
  }
  const double alpha = options.smoothing / (static_cast<double>(options.bins) * static_cast<double>(per_class.size()));

  const auto dims = static_cast<std::size_t>(x.cols());
  std::vector<double> out(dims, 0.0);
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (dims + kBlock - 1) / kBlock;
  parallel_for(blocks, [&](std::size_t blk) {
    std::vector<float> column(static_cast<std::size_t>(x.rows()));
    const std::size_t hi = std::min(dims, (blk + 1) * kBlock);
    for (std::size_t d = blk * kBlock; d < hi; ++d) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) column[static_cast<std::size_t>(i)] = x(i, static_cast<Eigen::Index>(d));
      const auto bins = equal_frequency_bins(column, options.bins);
      out[d] = mutual_information(bins, labels, alpha);
    }
  });
  return out;
}

ClusterImportance cluster_importance(std::span<const double> mi, const FvLayout& layout) {
  if (mi.size() != layout.size()) {
    throw std::invalid_argument("cluster_importance: " + std::to_string(mi.size()) + " MI values for a layout of " +
                                std::to_string(layout.size()) + " dimensions");
  }
  ClusterImportance ci{layout, std::vector<double>(layout.clusters(), 0.0)};
  const std::size_t cs = layout.cluster_size();
  for (std::size_t c = 0; c < ci.scores.size(); ++c) {
    double s = 0.0;
    for (std::size_t t = 0; t < cs; ++t) s += mi[c * cs + t];
    ci.scores[c] = s;
  }
  return ci;
}

std::size_t SelectionMask::kept_count() const { return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true)); }

std::vector<std::size_t> SelectionMask::kept_clusters() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < kept.size(); ++c)
    if (kept[c]) out.push_back(c);
  return out;
}

SelectionMask select_clusters(const ClusterImportance& importance, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("select_clusters: fraction must be in (0, 1]");
  const std::size_t total = importance.scores.size();
  if (total != importance.layout.clusters()) throw std::invalid_argument("select_clusters: importance/layout mismatch");
  SelectionMask mask;
  mask.fraction = fraction;
  mask.layout = importance.layout;
  mask.importance = importance.scores;
  mask.ranking.resize(total);
  std::iota(mask.ranking.begin(), mask.ranking.end(), std::size_t{0});
  std::stable_sort(mask.ranking.begin(), mask.ranking.end(), [&](std::size_t a, std::size_t b) {
    if (importance.scores[a] != importance.scores[b]) return importance.scores[a] > importance.scores[b];
    return a < b;
  });
  const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total))),
                                            std::size_t{1}, total);
  mask.kept.assign(total, false);
  for (std::size_t r = 0; r < keep; ++r) mask.kept[mask.ranking[r]] = true;
  return mask;
}

nlohmann::json SelectionMask::to_json() const {
  nlohmann::json clusters = nlohmann::json::array();
  std::vector<std::size_t> rank_of(kept.size());
  for (std::size_t r = 0; r < ranking.size(); ++r) rank_of[ranking[r]] = r;
  for (std::size_t c = 0; c < kept.size(); ++c) {
    clusters.push_back(nlohmann::json{{"id", c},
                                      {"group", c / static_cast<std::size_t>(layout.components)},
                                      {"component", c % static_cast<std::size_t>(layout.components)},
                                      {"importance", importance.empty() ? 0.0 : importance[c]},
                                      {"rank", rank_of[c]},
                                      {"kept", static_cast<bool>(kept[c])}});
  }
  return nlohmann::json{{"fraction", fraction},
                        {"layout", layout.to_json()},
                        {"kept_count", kept_count()},
                        {"masked_length", masked_length()},
                        {"clusters", clusters}};
}

SelectionMask SelectionMask::from_json(const nlohmann::json& j) {
  try {
    SelectionMask m;
    m.fraction = j.at("fraction").get<double>();
    m.layout = FvLayout::from_json(j.at("layout"));
    const auto& clusters = j.at("clusters");
    if (clusters.size() != m.layout.clusters()) throw DataError("selection mask: cluster count does not match layout");
    m.kept.assign(clusters.size(), false);
    m.importance.assign(clusters.size(), 0.0);
    m.ranking.assign(clusters.size(), 0);
    for (const auto& c : clusters) {
      const auto id = c.at("id").get<std::size_t>();
      const auto rank = c.at("rank").get<std::size_t>();
      if (id >= clusters.size() || rank >= clusters.size()) throw DataError("selection mask: cluster id out of range");
      m.kept[id] = c.at("kept").get<bool>();
      m.importance[id] = c.at("importance").get<double>();
      m.ranking[rank] = id;
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("selection mask: ") + e.what());
  }
}

}  // namespace fgpart
