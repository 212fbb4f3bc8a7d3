#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "fgpart/errors.hpp"
#include "fgpart/pipeline.hpp"
#include "fgpart/synth.hpp"
#include "test_util.hpp"

using namespace fgpart;
namespace fs = std::filesystem;

namespace {

SynthDataset small_dataset() {
  SynthConfig sc = SynthConfig::preset(SynthVariant::Planted);
  sc.train_per_class = 20;
  sc.test_per_class = 10;
  sc.seed = 5;
  return make_synthetic(sc);
}

PipelineConfig small_config(const std::string& features, const fs::path& root) {
  PipelineConfig c;
  c.features = features;
  c.model_dir = (root / "models").string();
  c.output_dir = (root / "out").string();
  c.stack = "synthetic-6";
  c.scales = 6;
  c.pca_dims = 4;
  c.components = 4;
  c.pca_samples = 2000;
  c.gmm_samples = 1000;
  c.fraction = 0.5;
  c.top_k = 5;
  c.seed = 11;
  return c;
}

const char* const kArtifacts[] = {
    "models/pca.pfvm",        "models/grouping.json",     "models/gmm-0.pfvm",       "models/gmm-4.pfvm",
    "models/encoded.pfvm",    "models/layout.json",       "models/selection.json",   "models/encoded-masked.pfvm",
    "models/layout-masked.json", "models/svm.pfvm",       "models/svm-masked.pfvm",  "models/scorers-0-1.pfvm",
    "out/eval.json",          "out/eval-masked.json",     "out/keyparts-0-1.json",
};

void run_all(PipelineConfig cfg) {
  std::ostringstream log;
  for (const char* s : {"pca-fit", "gmm-fit", "encode", "select"}) run_stage(s, cfg, log);
  for (bool masked : {false, true}) {
    cfg.use_mask = masked;
    for (const char* s : {"encode", "train", "eval"}) {
      if (!masked && std::string(s) == "encode") continue;
      run_stage(s, cfg, log);
    }
  }
  cfg.use_mask = false;
  run_stage("keyparts", cfg, log);
}

}  // namespace

TEST_CASE("config json round trip and rejection") {
  PipelineConfig c;
  c.pca_dims = 7;
  c.fraction = 0.125;
  c.grouping = "single";
  const PipelineConfig back = PipelineConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(PipelineConfig::from_json(nlohmann::json::object()).to_json() == PipelineConfig{}.to_json());
  CHECK_THROWS_AS(PipelineConfig::from_json({{"pca_dim", 3}}), UsageError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"pca_dims", "three"}}), UsageError);
  CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::array()), UsageError);
  CHECK_THROWS_AS(PipelineConfig::load("/nonexistent/cfg.json"), MissingArtifact);
}

TEST_CASE("reservoir keeps a uniform fixed-size sample") {
  Reservoir small(10, 1, 1);
  for (int i = 0; i < 4; ++i) small.offer(std::vector<double>{double(i)});
  CHECK(small.size() == 4);
  CHECK(small.matrix()(3, 0) == 3.0);

  // Inclusion frequency of each of 100 items in a 10-slot reservoir is 0.1.
  std::vector<int> hits(100, 0);
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    Reservoir r(10, 1, static_cast<std::uint64_t>(t));
    for (int i = 0; i < 100; ++i) r.offer(std::vector<double>{double(i)});
    CHECK(r.seen() == 100);
    const RowMatrixD m = r.matrix();
    REQUIRE(m.rows() == 10);
    for (Eigen::Index k = 0; k < 10; ++k) ++hits[static_cast<std::size_t>(m(k, 0))];
  }
  for (int h : hits) CHECK(std::abs(h / double(trials) - 0.1) < 0.025);

  Reservoir a(5, 2, 9), b(5, 2, 9);
  for (int i = 0; i < 50; ++i) {
    a.offer(std::vector<float>{float(i), float(-i)});
    b.offer(std::vector<float>{float(i), float(-i)});
  }
  CHECK(a.matrix() == b.matrix());
}

TEST_CASE("file and memory sources encode identically") {
  testutil::TempDir dir("pipe-src");
  const SynthDataset ds = small_dataset();
  const auto path = dir.file("f.pfv1");
  write_features(path, ds.records);
  const PipelineConfig cfg = small_config(path, dir.path());
  const auto mem = memory_source(ds.records);
  EncoderModels m;
  m.stack = ds.stack;
  m.pca = fit_pca_stage(mem, ds.stack, cfg);
  m.grouping = default_grouping(6);
  m.gmms = fit_gmm_stage(mem, ds.stack, m.pca, m.grouping, cfg);
  const EncodedSet a = encode_stage(mem, m, nullptr, cfg);
  const EncodedSet b = encode_stage(file_source(path), m, nullptr, cfg);
  CHECK(a.values == b.values);
  CHECK(a.ids == b.ids);
  CHECK(a.width() == m.layout().size());
  CHECK(a.rows(Split::Train).rows() == 40);
  CHECK(a.labels_of(Split::Test).size() == 20);

  const EncodedSet back = EncodedSet::from_file(a.to_file());
  CHECK(back.values == a.values);
  CHECK(back.labels == a.labels);
  CHECK(back.splits == a.splits);

  const SelectionMask mask = select_stage(a, cfg);
  const EncodedSet masked = encode_stage(mem, m, &mask, cfg);
  CHECK(masked.width() == mask.masked_length());
  CHECK(masked.kept == mask.kept_clusters());
}

TEST_CASE("file stages are deterministic and report missing inputs") {
  testutil::TempDir dir("pipe-files");
  const SynthDataset ds = small_dataset();
  const auto features = dir.file("f.pfv1");
  write_features(features, ds.records);
  const fs::path r1 = dir.path() / "run1", r2 = dir.path() / "run2";
  run_all(small_config(features, r1));
  run_all(small_config(features, r2));
  for (const char* a : kArtifacts) {
    CAPTURE(a);
    REQUIRE(fs::exists(r1 / a));
    CHECK(testutil::read_bytes((r1 / a).string()) == testutil::read_bytes((r2 / a).string()));
  }
  CHECK(fs::exists(r1 / "models" / "pca-fit.config.json"));
  CHECK(fs::exists(r1 / "out" / "eval.config.json"));

  const auto eval = nlohmann::json::parse(testutil::read_bytes((r1 / "out/eval.json").string()));
  CHECK(eval.at("accuracy").get<double>() >= 0.0);
  CHECK(eval.at("total") == 20);

  std::ostringstream log;
  const PipelineConfig empty = small_config(features, dir.path() / "empty");
  for (const char* s : {"gmm-fit", "encode", "select", "train", "eval", "keyparts"}) {
    CAPTURE(s);
    CHECK_THROWS_AS(run_stage(s, empty, log), MissingArtifact);
  }
  PipelineConfig nofeat = empty;
  nofeat.features = dir.file("missing.pfv1");
  CHECK_THROWS_AS(run_stage("pca-fit", nofeat, log), MissingArtifact);
  nofeat.features.clear();
  CHECK_THROWS_AS(run_stage("pca-fit", nofeat, log), UsageError);
  CHECK_THROWS_AS(run_stage("frobnicate", empty, log), UsageError);

  PipelineConfig bad_group = small_config(features, r1);
  bad_group.grouping = "thirds";
  CHECK_THROWS_AS(run_stage("gmm-fit", bad_group, log), UsageError);
}

TEST_CASE("too few samples for the mixture is a data error") {
  const SynthDataset ds = small_dataset();
  PipelineConfig cfg = small_config("", "/tmp");
  cfg.components = 2000;
  const auto src = memory_source(ds.records);
  const PcaModel pca = fit_pca_stage(src, ds.stack, cfg);
  CHECK_THROWS_AS(fit_gmm_stage(src, ds.stack, pca, default_grouping(6), cfg), DataError);
}
