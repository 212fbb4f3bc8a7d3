// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Everything runs on in-process synthetic data.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "fgpart/geometry.hpp"
#include "fgpart/gmm.hpp"
#include "fgpart/kernels.hpp"
#include "fgpart/mmp.hpp"
#include "fgpart/pipeline.hpp"
#include "fgpart/synth.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fgpart;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ------------------------------------------------------------------ geometry

Outcome receptive_field() {
  const LayerStack s = vgg_m_stack();
  const auto t0 = Clock::now();
  const auto r = receptive_extent(s, 1);
  const double ms = 1e3 * seconds_since(t0);
  return {r == 139 && ms < 1.0, fmt("extent %lld (want 139), %.4f ms (limit 1 ms)", static_cast<long long>(r), ms)};
}

// ------------------------------------------------------------------ MMP

ProposalRecord random_map(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  ProposalRecord p;
  p.box = Box{0, 0, 224, 224};
  p.grid = n;
  p.channels = d;
  p.values.resize(static_cast<std::size_t>(n) * n * d);
  for (float& v : p.values) v = static_cast<float>(rng.normal());
  return p;
}

Outcome mmp_oracle() {
  const auto t0 = Clock::now();
  const std::size_t count = mmp_count(13);
  int mismatched = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ProposalRecord p = random_map(13, 16, seed);
    const PartSet parts = multi_max_pool(p, vgg_m_stack());
    const auto naive = oracle::naive_mmp(p.values, 13, 16);
    bool same = naive.size() == parts.size();
    for (std::size_t i = 0; same && i < naive.size(); ++i) {
      const auto d = parts.descriptor(i);
      same = naive[i].scale == parts.parts[i].scale && naive[i].row == parts.parts[i].row &&
             naive[i].col == parts.parts[i].col &&
             std::memcmp(naive[i].descriptor.data(), d.data(), d.size() * sizeof(float)) == 0;
    }
    if (!same) ++mismatched;
  }
  const double s = seconds_since(t0);
  return {count == 819 && mismatched == 0 && s < 5.0,
          fmt("%zu windows (want 819), %d/100 maps differ from the naive oracle (kernels %s), %.2f s (limit 5 s)", count,
              mismatched, std::string(simd::kernels().name).c_str(), s)};
}

// ------------------------------------------------------------------ Fisher vectors

double fv_worst(double gamma_threshold, std::uint64_t seed) {
  Rng rng(seed);
  const ScaleGrouping grouping = single_group(1);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int K = 1 + static_cast<int>(rng.below(4));
    const int p = 1 + static_cast<int>(rng.below(4));
    const int T = static_cast<int>(rng.below(21));
    const GmmModel m = testutil::random_gmm(K, p, rng);
    RowMatrixD x(T, p);
    std::vector<std::vector<double>> parts;
    std::vector<PartKey> keys;
    for (int t = 0; t < T; ++t) {
      const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
      std::vector<double> row;
      for (int d = 0; d < p; ++d) {
        x(t, d) = m.means(k, d) + m.stds(k, d) * 1.5 * rng.normal();
        row.push_back(x(t, d));
      }
      parts.push_back(row);
      keys.push_back(PartKey{0, 1, t, 0});
    }
    const auto got = encode_group(keys, x, m, grouping, 0, EncodeOptions{gamma_threshold});
    const auto want = oracle::fisher_block(parts, testutil::to_mixture(m));
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  return worst;
}

Outcome fv_oracle() {
  const auto t0 = Clock::now();
  const double exact = fv_worst(0.0, 2024);
  const double s = seconds_since(t0);
  const double cutoff = fv_worst(EncodeOptions{}.gamma_threshold, 2024);
  return {exact <= 1e-6 && s < 10.0,
          fmt("max |diff| %.3g over 500 instances with exact accumulation (limit 1e-6), %.2f s (limit 10 s); "
              "with the default posterior cutoff %.3g",
              exact, s, cutoff)};
}

Outcome dimensions() {
  const PipelineConfig cfg;
  const EncoderModels m = testutil::identity_models(cfg.pca_dims, cfg.components, default_grouping(cfg.scales),
                                                    resolve_stack(cfg.stack), 1);
  Rng rng(2);
  ImageRecord rec;
  rec.image_id = "dims";
  rec.proposals.push_back(testutil::random_proposal(13, cfg.pca_dims, rng, Box{0, 0, 224, 224}));
  const FisherVector full = encode_image(rec, m);
  ClusterImportance imp{m.layout(), std::vector<double>(m.layout().clusters())};
  for (double& v : imp.scores) v = rng.uniform();
  const SelectionMask mask = select_clusters(imp, cfg.fraction);
  const FisherVector masked = encode_image(rec, m, &mask);
  return {full.values.size() == 262144 && masked.values.size() == 65536 && mask.masked_length() == 65536,
          fmt("full %zu (want 262144), fraction %.2f masked %zu (want 65536)", full.values.size(), cfg.fraction,
              masked.values.size())};
}

// ------------------------------------------------------------------ GMM

RowMatrixD mixture_sample(std::uint64_t seed, std::size_t n, int p, int centers) {
  Rng rng(seed);
  RowMatrixD mu(centers, p);
  for (Eigen::Index i = 0; i < mu.size(); ++i) mu.data()[i] = 3.0 * rng.normal();
  RowMatrixD x(static_cast<Eigen::Index>(n), p);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto c = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(centers)));
    for (int d = 0; d < p; ++d) x(i, d) = mu(c, d) + (0.5 + 0.3 * d) * rng.normal();
  }
  return x;
}

Outcome gmm() {
  int decreases = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int K = 2 + static_cast<int>(seed % 5);
    GmmOptions opt;
    opt.seed = seed;
    opt.tolerance = 0.0;
    opt.max_iterations = 60;
    const GmmFitResult r = gmm_fit(mixture_sample(100 + seed, 60 * K, 3, K + 1), K, opt);
    for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
      if (r.log_likelihood[i] < r.log_likelihood[i - 1] - 1e-9) ++decreases;
    }
  }

  Rng rng(2);
  RowMatrixD blobs(1000, 2);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    const double c = i % 2 ? 10.0 : 0.0;
    blobs(i, 0) = c + 0.5 * rng.normal();
    blobs(i, 1) = c + 0.5 * rng.normal();
  }
  const GmmFitResult b = gmm_fit(blobs, 2);
  const int lo = b.model.means(0, 0) < b.model.means(1, 0) ? 0 : 1, hi = 1 - lo;
  double mean_err = 0.0, weight_err = 0.0;
  for (int d = 0; d < 2; ++d) {
    mean_err = std::max({mean_err, std::abs(b.model.means(lo, d)), std::abs(b.model.means(hi, d) - 10.0)});
  }
  for (int k = 0; k < 2; ++k) weight_err = std::max(weight_err, std::abs(b.model.weights(k) - 0.5));

  const GmmFitResult f = gmm_fit(mixture_sample(3, 800, 4, 5), 6);
  GmmEvaluator ev(f.model);
  std::vector<double> g(6), x(4);
  double sum_err = 0.0;
  for (int t = 0; t < 1000; ++t) {
    for (double& v : x) v = 20.0 * rng.normal();
    ev.posteriors(x, g);
    double s = 0.0;
    for (double v : g) s += v;
    sum_err = std::max(sum_err, std::abs(s - 1.0));
  }
  return {decreases == 0 && mean_err < 0.2 && weight_err < 0.05 && sum_err <= 1e-12,
          fmt("%d log-likelihood decreases over 20 runs; blob means within %.3f (limit 0.2), weights within %.3f "
              "(limit 0.05); posterior sums within %.2g of 1 (limit 1e-12)",
              decreases, mean_err, weight_err, sum_err)};
}

// ------------------------------------------------------------------ MI

Outcome mutual_info() {
  std::vector<int> labels(1000);
  RowMatrixF perfect(1000, 1);
  for (int i = 0; i < 1000; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 2;
    perfect(i, 0) = static_cast<float>(i % 2);
  }
  const double mi_perfect = mi_per_dimension(perfect, labels)[0];

  Rng rng(12345);
  std::vector<int> l2(10000);
  RowMatrixF indep(10000, 1);
  for (Eigen::Index i = 0; i < 10000; ++i) {
    l2[static_cast<std::size_t>(i)] = static_cast<int>(i % 2);
    indep(i, 0) = static_cast<float>(rng.normal());
  }
  const double mi_indep = mi_per_dimension(indep, l2)[0];

  int sum_mismatch = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const FvLayout l{1 + static_cast<int>(rng.below(8)), 1 + static_cast<int>(rng.below(16)),
                     1 + static_cast<int>(rng.below(16))};
    std::vector<double> mi(l.size());
    for (double& v : mi) v = rng.uniform();
    if (cluster_importance(mi, l).scores != oracle::regroup_and_sum(mi, l.groups, l.components, l.dims)) ++sum_mismatch;
  }
  const double dev = std::abs(mi_perfect - std::numbers::ln2);
  return {dev <= 2e-3 && mi_indep < 0.01 && sum_mismatch == 0,
          fmt("informative |MI - ln2| = %.2e (limit 2e-3); independent MI %.2e (limit 0.01); %d/50 cluster-sum "
              "mismatches",
              dev, mi_indep, sum_mismatch)};
}

// ------------------------------------------------------------------ synthetic efficacy

struct Fitted {
  SynthDataset ds;
  PipelineConfig cfg;
  EncoderModels models;
};

Fitted fit(SynthVariant v, int K, int p, int seed, const ScaleGrouping* grouping = nullptr) {
  Fitted f;
  SynthConfig sc = SynthConfig::preset(v);
  sc.seed = 1000 + static_cast<std::uint64_t>(seed);
  f.ds = make_synthetic(sc);
  f.cfg.pca_dims = p;
  f.cfg.components = K;
  f.cfg.scales = sc.grid;
  f.cfg.seed = static_cast<std::uint64_t>(seed);
  const auto src = memory_source(f.ds.records);
  f.models.stack = f.ds.stack;
  f.models.pca = fit_pca_stage(src, f.ds.stack, f.cfg);
  f.models.grouping = grouping ? *grouping : default_grouping(sc.grid);
  f.models.gmms = fit_gmm_stage(src, f.ds.stack, f.models.pca, f.models.grouping, f.cfg);
  return f;
}

double accuracy(const EncodedSet& e) {
  return eval_stage(e, train_stage(e, {"a", "b"}, PipelineConfig{})).accuracy;
}

Outcome selection_efficacy() {
  const auto t0 = Clock::now();
  double full = 0.0, selected = 0.0;
  std::string per_seed;
  for (int s = 0; s < 5; ++s) {
    const Fitted f = fit(SynthVariant::Distractor, 16, 16, s);
    const auto src = memory_source(f.ds.records);
    const EncodedSet e = encode_stage(src, f.models, nullptr, f.cfg);
    const double a = accuracy(e);
    PipelineConfig cfg = f.cfg;
    cfg.fraction = 0.25;
    const SelectionMask mask = select_stage(e, cfg);
    const double b = accuracy(encode_stage(src, f.models, &mask, cfg));
    full += a / 5;
    selected += b / 5;
    per_seed += fmt(" %.3f/%.3f", b, a);
  }
  const double gain = 100 * (selected - full);
  const double s = seconds_since(t0);
  return {gain >= 5.0 && s < 300.0,
          fmt("fraction 0.25 %.2f%% vs 1.0 %.2f%%: %+.1f points (need >= +5), %.0f s (limit 300 s); per seed%s",
              100 * selected, 100 * full, gain, s, per_seed.c_str())};
}

Outcome scpm_efficacy() {
  const auto t0 = Clock::now();
  double grouped = 0.0, single = 0.0;
  std::string per_seed;
  for (int s = 0; s < 5; ++s) {
    const Fitted f = fit(SynthVariant::ScaleBanded, 8, 16, s);
    const double a = accuracy(encode_stage(memory_source(f.ds.records), f.models, nullptr, f.cfg));
    const ScaleGrouping one = single_group(f.ds.config.grid);
    const Fitted g = fit(SynthVariant::ScaleBanded, 8, 16, s, &one);
    const double b = accuracy(encode_stage(memory_source(g.ds.records), g.models, nullptr, g.cfg));
    grouped += a / 5;
    single += b / 5;
    per_seed += fmt(" %.3f/%.3f", a, b);
  }
  const double gain = 100 * (grouped - single);
  const double s = seconds_since(t0);
  return {gain >= 3.0 && s < 300.0,
          fmt("per-group %.2f%% vs single group %.2f%%: %+.1f points (need >= +3), %.0f s (limit 300 s); per seed%s",
              100 * grouped, 100 * single, gain, s, per_seed.c_str())};
}

Outcome key_parts() {
  const auto t0 = Clock::now();
  double worst = 1.0;
  bool antisymmetric = true;
  std::string per_seed;
  for (int s = 0; s < 3; ++s) {
    const Fitted f = fit(SynthVariant::Planted, 8, 8, s);
    const auto src = memory_source(f.ds.records);
    PipelineConfig cfg = f.cfg;
    cfg.fraction = 0.25;
    const SelectionMask mask = select_stage(encode_stage(src, f.models, nullptr, cfg), cfg);
    const KeyPartResult ab = keypart_stage(src, f.models, mask, cfg);

    std::map<std::string, Box> planted;
    for (std::size_t i = 0; i < f.ds.records.size(); ++i) planted[f.ds.records[i].image_id] = f.ds.planted[i];
    int hits = 0;
    for (const auto& p : ab.report.top) hits += iou(p.box, planted.at(p.image_id)) > 0.3;
    const double rate = ab.report.top.empty() ? 0.0 : double(hits) / double(ab.report.top.size());
    worst = std::min(worst, ab.report.top.size() == 20 ? rate : 0.0);
    per_seed += fmt(" %d/%zu", hits, ab.report.top.size());

    std::swap(cfg.class_a, cfg.class_b);
    const KeyPartResult ba = keypart_stage(src, f.models, mask, cfg);
    antisymmetric = antisymmetric && ab.scorers.scorers.size() == ba.scorers.scorers.size();
    for (std::size_t i = 0; antisymmetric && i < ab.scorers.scorers.size(); ++i) {
      const auto& x = ab.scorers.scorers[i].w;
      const auto& y = ba.scorers.scorers[i].w;
      for (std::size_t d = 0; d < x.size(); ++d) antisymmetric = antisymmetric && y[d] == -x[d];
    }
    antisymmetric = antisymmetric && ab.report.top.size() == ba.report.bottom.size();
    for (std::size_t i = 0; antisymmetric && i < ab.report.top.size(); ++i) {
      const auto& x = ab.report.top[i];
      const auto& y = ba.report.bottom[i];
      antisymmetric = x.image_id == y.image_id && x.box == y.box && x.proposal == y.proposal && y.score == -x.score;
    }
  }
  return {worst >= 0.7 && antisymmetric,
          fmt("worst seed %.0f%% of top-20 parts with IoU > 0.3 (need >= 70%%); per seed%s; class swap %s; %.0f s",
              100 * worst, per_seed.c_str(), antisymmetric ? "exactly antisymmetric" : "NOT antisymmetric",
              seconds_since(t0))};
}

// ------------------------------------------------------------------ determinism

Outcome determinism() {
  testutil::TempDir dir("acceptance-determinism");
  SynthConfig sc = SynthConfig::preset(SynthVariant::Planted);
  sc.train_per_class = 30;
  sc.test_per_class = 20;
  sc.seed = 7;
  const std::string features = dir.file("syn.pfv1");
  write_features(features, make_synthetic(sc).records);

  const std::vector<std::string> artifacts{
      "m/pca.pfvm",        "m/grouping.json",       "m/gmm-0.pfvm",         "m/gmm-4.pfvm",
      "m/encoded.pfvm",    "m/layout.json",         "m/selection.json",     "m/encoded-masked.pfvm",
      "m/svm.pfvm",        "m/svm-masked.pfvm",     "m/scorers-0-1.pfvm",   "o/eval.json",
      "o/eval-masked.json", "o/keyparts-0-1.json"};
  auto run_all = [&](const fs::path& root) {
    PipelineConfig c;
    c.features = features;
    c.model_dir = (root / "m").string();
    c.output_dir = (root / "o").string();
    c.stack = "synthetic-6";
    c.scales = 6;
    c.pca_dims = 8;
    c.components = 8;
    c.seed = 3;
    std::ostringstream log;
    for (const char* s : {"pca-fit", "gmm-fit", "encode", "select", "train", "eval", "keyparts"}) run_stage(s, c, log);
    c.use_mask = true;
    for (const char* s : {"encode", "train", "eval"}) run_stage(s, c, log);
  };
  run_all(dir.path() / "run1");
  run_all(dir.path() / "run2");
  std::size_t same = 0;
  std::string differing;
  for (const auto& a : artifacts) {
    const auto p1 = (dir.path() / "run1" / a).string(), p2 = (dir.path() / "run2" / a).string();
    if (fs::exists(p1) && testutil::read_bytes(p1) == testutil::read_bytes(p2)) {
      ++same;
    } else {
      differing += " " + a;
    }
  }
  return {same == artifacts.size(),
          fmt("%zu/%zu stage artifacts byte-identical across reruns%s", same, artifacts.size(),
              differing.empty() ? "" : ("; differing:" + differing).c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"receptive-field", receptive_field}, {"mmp-oracle", mmp_oracle},
      {"fv-oracle", fv_oracle},             {"dimensions", dimensions},
      {"gmm", gmm},                         {"mutual-information", mutual_info},
      {"selection-efficacy", selection_efficacy}, {"scpm-efficacy", scpm_efficacy},
      {"key-parts", key_parts},             {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %-20s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
