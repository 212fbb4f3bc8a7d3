#include "fgpart/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <tuple>

#include "fgpart/errors.hpp"
#include "fgpart/manifest.hpp"
#include "fgpart/parallel.hpp"

namespace fgpart {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

nlohmann::json PipelineConfig::to_json() const {
  return nlohmann::json{{"features", features},
                        {"classes", classes},
                        {"model_dir", model_dir},
                        {"output_dir", output_dir},
                        {"stack", stack},
                        {"pca_dims", pca_dims},
                        {"components", components},
                        {"grouping", grouping},
                        {"scales", scales},
                        {"fraction", fraction},
                        {"C", C},
                        {"seed", seed},
                        {"pca_samples", pca_samples},
                        {"gmm_samples", gmm_samples},
                        {"gamma_threshold", gamma_threshold},
                        {"mi_bins", mi_bins},
                        {"mi_smoothing", mi_smoothing},
                        {"use_mask", use_mask},
                        {"class_a", class_a},
                        {"class_b", class_b},
                        {"top_k", top_k},
                        {"nms_iou", nms_iou},
                        {"threads", threads}};
}

namespace {

template <class T>
void take(const nlohmann::json& v, const std::string& key, T& field) {
  try {
    field = v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type: " + v.dump());
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  PipelineConfig c;
  const std::map<std::string, std::function<void(const nlohmann::json&)>> setters{
      {"features", [&](const auto& v) { take(v, "features", c.features); }},
      {"classes", [&](const auto& v) { take(v, "classes", c.classes); }},
      {"model_dir", [&](const auto& v) { take(v, "model_dir", c.model_dir); }},
      {"output_dir", [&](const auto& v) { take(v, "output_dir", c.output_dir); }},
      {"stack", [&](const auto& v) { take(v, "stack", c.stack); }},
      {"pca_dims", [&](const auto& v) { take(v, "pca_dims", c.pca_dims); }},
      {"components", [&](const auto& v) { take(v, "components", c.components); }},
      {"grouping", [&](const auto& v) { take(v, "grouping", c.grouping); }},
      {"scales", [&](const auto& v) { take(v, "scales", c.scales); }},
      {"fraction", [&](const auto& v) { take(v, "fraction", c.fraction); }},
      {"C", [&](const auto& v) { take(v, "C", c.C); }},
      {"seed", [&](const auto& v) { take(v, "seed", c.seed); }},
      {"pca_samples", [&](const auto& v) { take(v, "pca_samples", c.pca_samples); }},
      {"gmm_samples", [&](const auto& v) { take(v, "gmm_samples", c.gmm_samples); }},
      {"gamma_threshold", [&](const auto& v) { take(v, "gamma_threshold", c.gamma_threshold); }},
      {"mi_bins", [&](const auto& v) { take(v, "mi_bins", c.mi_bins); }},
      {"mi_smoothing", [&](const auto& v) { take(v, "mi_smoothing", c.mi_smoothing); }},
      {"use_mask", [&](const auto& v) { take(v, "use_mask", c.use_mask); }},
      {"class_a", [&](const auto& v) { take(v, "class_a", c.class_a); }},
      {"class_b", [&](const auto& v) { take(v, "class_b", c.class_b); }},
      {"top_k", [&](const auto& v) { take(v, "top_k", c.top_k); }},
      {"nms_iou", [&](const auto& v) { take(v, "nms_iou", c.nms_iou); }},
      {"threads", [&](const auto& v) { take(v, "threads", c.threads); }},
  };
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw UsageError("unknown config key '" + key + "'");
    it->second(value);
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("config file '" + path + "' not found");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------- sources

ImageSource memory_source(const std::vector<ImageRecord>& records) {
  return ImageSource{[&records](std::size_t batch, const ImageSource::Visitor& fn) {
    batch = std::max<std::size_t>(batch, 1);
    for (std::size_t i = 0; i < records.size(); i += batch) {
      fn(std::span<const ImageRecord>(records).subspan(i, std::min(batch, records.size() - i)));
    }
  }};
}

ImageSource file_source(const std::string& path) {
  return ImageSource{[path](std::size_t batch, const ImageSource::Visitor& fn) {
    batch = std::max<std::size_t>(batch, 1);
    FeatureReader reader(path);
    std::vector<ImageRecord> buf;
    while (auto r = reader.next()) {
      buf.push_back(std::move(*r));
      if (buf.size() == batch) {
        fn(buf);
        buf.clear();
      }
    }
    if (!buf.empty()) fn(buf);
  }};
}

LayerStack resolve_stack(const std::string& name_or_path) {
  try {
    return preset_stack(name_or_path);
  } catch (const std::invalid_argument&) {
  }
  if (!fs::exists(name_or_path)) {
    throw MissingArtifact("layer stack '" + name_or_path + "' is neither a preset nor an existing file");
  }
  return load_stack(name_or_path);
}

// ---------------------------------------------------------------- reservoir

Reservoir::Reservoir(std::size_t capacity, std::size_t dims, std::uint64_t seed)
    : capacity_(capacity), dims_(dims), rng_(seed) {
  if (capacity == 0) throw std::invalid_argument("reservoir: capacity must be positive");
}

double* Reservoir::slot() {
  const std::size_t t = seen_++;
  if (t < capacity_) {
    rows_.resize(rows_.size() + dims_);
    return rows_.data() + t * dims_;
  }
  const auto j = static_cast<std::size_t>(rng_.below(t + 1));
  return j < capacity_ ? rows_.data() + j * dims_ : nullptr;
}

void Reservoir::offer(std::span<const double> row) {
  if (row.size() != dims_) throw std::invalid_argument("reservoir: row length mismatch");
  if (double* s = slot()) std::copy(row.begin(), row.end(), s);
}

void Reservoir::offer(std::span<const float> row) {
  if (row.size() != dims_) throw std::invalid_argument("reservoir: row length mismatch");
  if (double* s = slot()) std::copy(row.begin(), row.end(), s);
}

std::size_t Reservoir::size() const { return std::min(seen_, capacity_); }

RowMatrixD Reservoir::matrix() const {
  RowMatrixD m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dims_));
  std::copy(rows_.begin(), rows_.end(), m.data());
  return m;
}

// ---------------------------------------------------------------- stages

namespace {

std::size_t batch_size() { return std::max<std::size_t>(2 * thread_count(), 2); }

/// Runs `work` on every training proposal in parallel chunks, then hands the
/// results to `sink` in (image, proposal) order.
template <class Result>
void for_each_train_proposal(const ImageSource& source, const std::function<Result(const ProposalRecord&)>& work,
                             const std::function<void(Result&)>& sink) {
  source.visit(batch_size(), [&](std::span<const ImageRecord> images) {
    std::vector<const ProposalRecord*> props;
    for (const auto& im : images)
      if (im.split == Split::Train)
        for (const auto& p : im.proposals) props.push_back(&p);
    const std::size_t chunk = batch_size() * 4;
    for (std::size_t lo = 0; lo < props.size(); lo += chunk) {
      const std::size_t hi = std::min(props.size(), lo + chunk);
      std::vector<Result> results(hi - lo);
      parallel_for(hi - lo, [&](std::size_t i) { results[i] = work(*props[lo + i]); });
      for (auto& r : results) sink(r);
    }
  });
}

void check_grid(const ProposalRecord& p, int scales) {
  if (p.grid > scales) {
    throw DataError("proposal grid " + std::to_string(p.grid) + " exceeds the configured " + std::to_string(scales) +
                    " scales");
  }
}

}  // namespace

PcaModel fit_pca_stage(const ImageSource& source, const LayerStack& stack, const PipelineConfig& cfg) {
  std::optional<Reservoir> reservoir;
  int channels = -1;
  for_each_train_proposal<PartSet>(
      source,
      [&](const ProposalRecord& p) {
        check_grid(p, cfg.scales);
        return multi_max_pool(p, stack);
      },
      [&](PartSet& parts) {
        if (channels < 0) {
          channels = parts.channels;
          reservoir.emplace(cfg.pca_samples, static_cast<std::size_t>(channels), derive_seed(cfg.seed, 1));
        } else if (parts.channels != channels) {
          throw DataError("proposals disagree on channel count (" + std::to_string(parts.channels) + " vs " +
                          std::to_string(channels) + ")");
        }
        for (std::size_t i = 0; i < parts.size(); ++i) reservoir->offer(parts.descriptor(i));
      });
  if (!reservoir) throw DataError("no training proposals to fit PCA on");
  if (reservoir->size() < static_cast<std::size_t>(cfg.pca_dims)) {
    throw DataError("PCA needs at least " + std::to_string(cfg.pca_dims) + " training parts, got " +
                    std::to_string(reservoir->size()));
  }
  if (cfg.pca_dims > channels) {
    throw DataError("pca_dims " + std::to_string(cfg.pca_dims) + " exceeds the " + std::to_string(channels) +
                    " feature channels");
  }
  const RowMatrixF sample = reservoir->matrix().cast<float>();
  return pca_fit(sample, cfg.pca_dims, PcaOptions{0, derive_seed(cfg.seed, 2)});
}

std::vector<GmmModel> fit_gmm_stage(const ImageSource& source, const LayerStack& stack, const PcaModel& pca,
                                    const ScaleGrouping& grouping, const PipelineConfig& cfg) {
  const auto p = static_cast<std::size_t>(pca.output_dims());
  std::vector<Reservoir> reservoirs;
  for (int g = 0; g < grouping.groups(); ++g) {
    reservoirs.emplace_back(cfg.gmm_samples, p, derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(g)));
  }
  struct Reduced {
    std::vector<int> groups;
    std::vector<double> rows;
  };
  for_each_train_proposal<Reduced>(
      source,
      [&](const ProposalRecord& prop) {
        check_grid(prop, grouping.scales());
        if (prop.channels != pca.input_dims()) throw DataError("proposal channel count does not match the PCA model");
        const PartSet parts = multi_max_pool(prop, stack);
        Reduced r;
        r.groups.resize(parts.size());
        r.rows.resize(parts.size() * p);
        for (std::size_t i = 0; i < parts.size(); ++i) {
          r.groups[i] = grouping.group_of(parts.parts[i].scale);
          pca.apply(parts.descriptor(i), std::span<double>(r.rows.data() + i * p, p));
        }
        return r;
      },
      [&](Reduced& r) {
        for (std::size_t i = 0; i < r.groups.size(); ++i) {
          reservoirs[static_cast<std::size_t>(r.groups[i])].offer(std::span<const double>(r.rows.data() + i * p, p));
        }
      });

  std::vector<GmmModel> out;
  for (int g = 0; g < grouping.groups(); ++g) {
    const auto& res = reservoirs[static_cast<std::size_t>(g)];
    const std::size_t need = 10 * static_cast<std::size_t>(cfg.components);
    if (res.size() < need) {
      throw DataError("scale group " + std::to_string(g) + " has " + std::to_string(res.size()) +
                      " training parts; the GMM needs at least " + std::to_string(need));
    }
    GmmOptions o;
    o.seed = derive_seed(cfg.seed, 200 + static_cast<std::uint64_t>(g));
    GmmModel m = gmm_fit(res.matrix(), cfg.components, o).model;
    m.group = g;
    out.push_back(std::move(m));
  }
  return out;
}

RowMatrixF EncodedSet::rows(Split s) const {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == s) idx.push_back(static_cast<Eigen::Index>(i));
  RowMatrixF m(static_cast<Eigen::Index>(idx.size()), values.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = values.row(idx[r]);
  return m;
}

std::vector<int> EncodedSet::labels_of(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == s) out.push_back(labels[i]);
  return out;
}

ModelFile EncodedSet::to_file() const {
  ModelFile f;
  f.kind = "encoded";
  f.meta["layout"] = layout.to_json();
  f.meta["kept"] = kept;
  f.meta["width"] = width();
  f.meta["ids"] = ids;
  f.meta["labels"] = labels;
  std::vector<std::string> sp;
  for (auto s : splits) sp.emplace_back(to_string(s));
  f.meta["splits"] = sp;
  const auto n = static_cast<std::size_t>(values.rows());
  f.add("fv", {n, width()}, std::vector<float>(values.data(), values.data() + values.size()));
  return f;
}

EncodedSet EncodedSet::from_file(const ModelFile& f) {
  try {
    EncodedSet e;
    e.layout = FvLayout::from_json(f.meta.at("layout"));
    e.kept = f.meta.at("kept").get<std::vector<std::size_t>>();
    const auto w = f.meta.at("width").get<std::size_t>();
    e.ids = f.meta.at("ids").get<std::vector<std::string>>();
    e.labels = f.meta.at("labels").get<std::vector<int>>();
    for (const auto& s : f.meta.at("splits").get<std::vector<std::string>>()) e.splits.push_back(parse_split(s));
    const std::size_t n = e.ids.size();
    if (e.labels.size() != n || e.splits.size() != n) throw DataError("encoded set: per-image tables differ in length");
    const std::size_t expect_w = e.kept.empty() ? e.layout.size() : e.kept.size() * e.layout.cluster_size();
    if (w != expect_w) throw DataError("encoded set: width does not match its layout");
    const auto& a = f.array("fv", n * w);
    e.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(w));
    std::copy(a.data.begin(), a.data.end(), e.values.data());
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("encoded set: ") + ex.what());
  }
}

EncodedSet encode_stage(const ImageSource& source, const EncoderModels& models, const SelectionMask* mask,
                        const PipelineConfig& cfg) {
  models.validate();
  EncodedSet e;
  e.layout = models.layout();
  if (mask) {
    if (!(mask->layout == e.layout)) throw DataError("selection mask layout does not match the encoder models");
    e.kept = mask->kept_clusters();
  }
  const EncodeOptions opts{cfg.gamma_threshold};
  std::vector<std::vector<float>> rows;
  source.visit(batch_size(), [&](std::span<const ImageRecord> images) {
    std::vector<std::vector<float>> out(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
      const FisherVector fv = encode_image(images[i], models, mask, opts);
      out[i].assign(fv.values.begin(), fv.values.end());
    });
    for (std::size_t i = 0; i < images.size(); ++i) {
      e.ids.push_back(images[i].image_id);
      e.labels.push_back(images[i].label);
      e.splits.push_back(images[i].split);
      rows.push_back(std::move(out[i]));
    }
  });
  const std::size_t w = e.kept.empty() ? e.layout.size() : e.kept.size() * e.layout.cluster_size();
  e.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(w));
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), e.values.row(static_cast<Eigen::Index>(i)).data());
  return e;
}

SelectionMask select_stage(const EncodedSet& encoded, const PipelineConfig& cfg) {
  if (!encoded.kept.empty()) throw DataError("selection needs the full (unmasked) encoding");
  const RowMatrixF x = encoded.rows(Split::Train);
  const std::vector<int> y = encoded.labels_of(Split::Train);
  if (x.rows() == 0) throw DataError("no training images in the encoding");
  MiOptions mo;
  mo.bins = cfg.mi_bins;
  mo.smoothing = cfg.mi_smoothing;
  const auto mi = mi_per_dimension(x, y, mo);
  return select_clusters(cluster_importance(mi, encoded.layout), cfg.fraction);
}

std::vector<std::string> resolve_class_names(const PipelineConfig& cfg, std::span<const int> labels) {
  if (!cfg.classes.empty()) {
    std::ifstream in(cfg.classes);
    if (!in) throw MissingArtifact("class table '" + cfg.classes + "' not found");
    auto names = parse_class_table(in);
    for (int l : labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= names.size()) {
        throw DataError("label " + std::to_string(l) + " is outside the class table");
      }
    }
    return names;
  }
  int top = -1;
  for (int l : labels) {
    if (l < 0) throw DataError("negative label " + std::to_string(l));
    top = std::max(top, l);
  }
  std::vector<std::string> names;
  for (int c = 0; c <= top; ++c) names.push_back(std::to_string(c));
  return names;
}

LinearModel train_stage(const EncodedSet& encoded, std::vector<std::string> class_names, const PipelineConfig& cfg) {
  const RowMatrixF x = encoded.rows(Split::Train);
  const std::vector<int> y = encoded.labels_of(Split::Train);
  if (x.rows() == 0) throw DataError("no training images in the encoding");
  SvmOptions o;
  o.C = cfg.C;
  o.seed = derive_seed(cfg.seed, 300);
  try {
    return svm_train(x, y, std::move(class_names), o);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

EvalReport eval_stage(const EncodedSet& encoded, const LinearModel& model) {
  const RowMatrixF x = encoded.rows(Split::Test);
  if (x.rows() == 0) throw DataError("no test images in the encoding");
  if (static_cast<std::size_t>(x.cols()) != model.dims()) {
    throw DataError("encoding width " + std::to_string(x.cols()) + " does not match the classifier's " +
                    std::to_string(model.dims()));
  }
  return evaluate(model, x, encoded.labels_of(Split::Test));
}

KeyPartResult keypart_stage(const ImageSource& source, const EncoderModels& models, const SelectionMask& mask,
                            const PipelineConfig& cfg) {
  models.validate();
  if (!(mask.layout == models.layout())) throw DataError("selection mask does not match the encoder models");
  const auto kept = mask.kept_clusters();
  const int a = cfg.class_a, b = cfg.class_b;
  auto in_pair = [&](const ImageRecord& r) { return r.label == a || r.label == b; };

  std::vector<RowMatrixF> aggregates;
  std::vector<std::int8_t> y;
  source.visit(batch_size(), [&](std::span<const ImageRecord> images) {
    std::vector<std::optional<RowMatrixF>> out(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
      if (images[i].split != Split::Train || !in_pair(images[i])) return;
      out[i] = cluster_aggregates(reduce_image(images[i], models), kept, models);
    });
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (!out[i]) continue;
      aggregates.push_back(std::move(*out[i]));
      y.push_back(images[i].label == a ? 1 : -1);
    }
  });
  SvmOptions o;
  o.C = cfg.C;
  o.seed = derive_seed(cfg.seed, 400);
  KeyPartResult res;
  res.scorers = train_scorers_from_aggregates(aggregates, y, a, b, kept, models, o);

  // Per-image top/bottom candidates; the final pick over their union equals
  // a pick over all parts because suppression never crosses images.
  std::vector<ScoredPart> candidates;
  bool any_test = false;
  source.visit(batch_size(), [&](std::span<const ImageRecord> images) {
    std::vector<std::vector<ScoredPart>> out(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
      if (images[i].split != Split::Test || !in_pair(images[i])) return;
      const auto scored = score_parts(reduce_image(images[i], models), res.scorers);
      if (scored.empty()) return;
      auto local = top_parts_report(scored, cfg.top_k, cfg.nms_iou);
      out[i] = std::move(local.top);
      out[i].insert(out[i].end(), local.bottom.begin(), local.bottom.end());
    });
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (images[i].split == Split::Test && in_pair(images[i])) any_test = true;
      candidates.insert(candidates.end(), out[i].begin(), out[i].end());
    }
  });
  if (!any_test) throw DataError("no test images of classes " + std::to_string(a) + " and " + std::to_string(b));
  // A part picked for both lists of one image appears twice; drop the copy.
  std::sort(candidates.begin(), candidates.end(), [](const ScoredPart& l, const ScoredPart& r) {
    return std::tie(l.image_id, l.proposal, l.scale, l.row, l.col) < std::tie(r.image_id, r.proposal, r.scale, r.row, r.col);
  });
  candidates.erase(std::unique(candidates.begin(), candidates.end(),
                               [](const ScoredPart& l, const ScoredPart& r) {
                                 return l.image_id == r.image_id && l.proposal == r.proposal && l.scale == r.scale &&
                                        l.row == r.row && l.col == r.col;
                               }),
                   candidates.end());
  res.report = top_parts_report(candidates, cfg.top_k, cfg.nms_iou);
  res.report.class_a = a;
  res.report.class_b = b;
  return res;
}

// ---------------------------------------------------------------- file stages

namespace {

std::string artifact(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void require(const std::string& path, const std::string& producer) {
  if (!fs::exists(path)) throw MissingArtifact("missing " + path + " (run `fgpart " + producer + "` first)");
}

void require_features(const PipelineConfig& cfg) {
  if (cfg.features.empty()) throw UsageError("no feature file given (config \"features\" or --features)");
  if (!fs::exists(cfg.features)) throw MissingArtifact("feature file " + cfg.features + " not found");
}

void snapshot(const std::string& dir, const std::string& stage, const PipelineConfig& cfg) {
  const nlohmann::json j{{"stage", stage}, {"config", cfg.to_json()}};
  write_text_atomic(artifact(dir, stage + ".config.json"), j.dump(2) + "\n");
}

std::string gmm_name(int g) { return "gmm-" + std::to_string(g) + ".pfvm"; }

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

SelectionMask load_mask(const PipelineConfig& cfg) {
  const auto path = artifact(cfg.model_dir, "selection.json");
  require(path, "select");
  return SelectionMask::from_json(read_json(path));
}

std::string encoded_name(bool masked) { return masked ? "encoded-masked.pfvm" : "encoded.pfvm"; }

EncodedSet load_encoded(const PipelineConfig& cfg, bool masked) {
  const auto path = artifact(cfg.model_dir, encoded_name(masked));
  require(path, masked ? "encode --mask" : "encode");
  return EncodedSet::from_file(read_model_file(path, "encoded"));
}

}  // namespace

EncoderModels load_encoder_models(const PipelineConfig& cfg) {
  EncoderModels m;
  m.stack = resolve_stack(cfg.stack);
  const auto pca_path = artifact(cfg.model_dir, "pca.pfvm");
  require(pca_path, "pca-fit");
  m.pca = PcaModel::from_file(read_model_file(pca_path, "pca"));
  const auto grouping_path = artifact(cfg.model_dir, "grouping.json");
  require(grouping_path, "gmm-fit");
  m.grouping = ScaleGrouping::from_json(read_json(grouping_path));
  for (int g = 0; g < m.grouping.groups(); ++g) {
    const auto path = artifact(cfg.model_dir, gmm_name(g));
    require(path, "gmm-fit");
    m.gmms.push_back(GmmModel::from_file(read_model_file(path, "gmm")));
  }
  m.validate();
  return m;
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"pca-fit", "gmm-fit", "encode", "select", "train", "eval", "keyparts"};
  return names;
}

void run_stage(const std::string& stage, const PipelineConfig& cfg, std::ostream& log) {
  const auto& md = cfg.model_dir;
  if (stage == "pca-fit") {
    require_features(cfg);
    const PcaModel pca = fit_pca_stage(file_source(cfg.features), resolve_stack(cfg.stack), cfg);
    write_model_file(artifact(md, "pca.pfvm"), pca.to_file());
    snapshot(md, stage, cfg);
    log << "pca-fit: " << pca.input_dims() << " -> " << pca.output_dims() << " dims (rank " << pca.effective_rank
        << ")\n";
  } else if (stage == "gmm-fit") {
    require_features(cfg);
    const auto pca_path = artifact(md, "pca.pfvm");
    require(pca_path, "pca-fit");
    const PcaModel pca = PcaModel::from_file(read_model_file(pca_path, "pca"));
    ScaleGrouping grouping;
    try {
      grouping = grouping_by_name(cfg.grouping, cfg.scales);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const auto gmms = fit_gmm_stage(file_source(cfg.features), resolve_stack(cfg.stack), pca, grouping, cfg);
    for (const auto& g : gmms) write_model_file(artifact(md, gmm_name(g.group)), g.to_file());
    write_text_atomic(artifact(md, "grouping.json"), grouping.to_json().dump(2) + "\n");
    snapshot(md, stage, cfg);
    log << "gmm-fit: " << gmms.size() << " groups x " << cfg.components << " components\n";
  } else if (stage == "encode") {
    require_features(cfg);
    const EncoderModels models = load_encoder_models(cfg);
    std::optional<SelectionMask> mask;
    if (cfg.use_mask) mask = load_mask(cfg);
    const EncodedSet e = encode_stage(file_source(cfg.features), models, mask ? &*mask : nullptr, cfg);
    write_model_file(artifact(md, encoded_name(cfg.use_mask)), e.to_file());
    nlohmann::json layout = e.layout.to_json();
    layout["width"] = e.width();
    layout["kept"] = e.kept;
    write_text_atomic(artifact(md, cfg.use_mask ? "layout-masked.json" : "layout.json"), layout.dump(2) + "\n");
    snapshot(md, cfg.use_mask ? "encode-masked" : "encode", cfg);
    log << "encode: " << e.ids.size() << " images x " << e.width() << " dims\n";
  } else if (stage == "select") {
    const EncodedSet e = load_encoded(cfg, false);
    const SelectionMask mask = select_stage(e, cfg);
    write_text_atomic(artifact(md, "selection.json"), mask.to_json().dump(2) + "\n");
    snapshot(md, stage, cfg);
    log << "select: kept " << mask.kept_count() << " of " << mask.kept.size() << " clusters (" << mask.masked_length()
        << " dims)\n";
  } else if (stage == "train") {
    const EncodedSet e = load_encoded(cfg, cfg.use_mask);
    auto names = resolve_class_names(cfg, e.labels);
    const LinearModel model = train_stage(e, std::move(names), cfg);
    write_model_file(artifact(md, cfg.use_mask ? "svm-masked.pfvm" : "svm.pfvm"), model.to_file());
    snapshot(md, cfg.use_mask ? "train-masked" : "train", cfg);
    log << "train: " << model.num_classes() << " classes, " << model.dims() << " dims\n";
  } else if (stage == "eval") {
    const auto model_path = artifact(md, cfg.use_mask ? "svm-masked.pfvm" : "svm.pfvm");
    require(model_path, cfg.use_mask ? "train --mask" : "train");
    const LinearModel model = LinearModel::from_file(read_model_file(model_path, "linear-svm"));
    const EncodedSet e = load_encoded(cfg, cfg.use_mask);
    const EvalReport r = eval_stage(e, model);
    nlohmann::json j = r.to_json();
    j["masked"] = cfg.use_mask;
    j["width"] = e.width();
    write_text_atomic(artifact(cfg.output_dir, cfg.use_mask ? "eval-masked.json" : "eval.json"), j.dump(2) + "\n");
    snapshot(cfg.output_dir, cfg.use_mask ? "eval-masked" : "eval", cfg);
    log << "eval: accuracy " << r.accuracy << " (" << r.correct << "/" << r.total << ")\n";
  } else if (stage == "keyparts") {
    require_features(cfg);
    const EncoderModels models = load_encoder_models(cfg);
    const SelectionMask mask = load_mask(cfg);
    const KeyPartResult res = keypart_stage(file_source(cfg.features), models, mask, cfg);
    const std::string pair = std::to_string(cfg.class_a) + "-" + std::to_string(cfg.class_b);
    write_model_file(artifact(md, "scorers-" + pair + ".pfvm"), res.scorers.to_file());
    std::vector<std::string> names;
    if (!cfg.classes.empty()) names = resolve_class_names(cfg, {});
    write_text_atomic(artifact(cfg.output_dir, "keyparts-" + pair + ".json"),
                      res.report.to_json(names, models.layout().components).dump(2) + "\n");
    snapshot(cfg.output_dir, "keyparts-" + pair, cfg);
    log << "keyparts: " << res.scorers.scorers.size() << " scorers, top " << res.report.top.size() << " / bottom "
        << res.report.bottom.size() << " parts\n";
  } else {
    throw UsageError("unknown stage '" + stage + "'");
  }
}

}  // namespace fgpart
