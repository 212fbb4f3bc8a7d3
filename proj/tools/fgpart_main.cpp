// fgpart: stage-by-stage driver for the part-proposal pipeline.
//
//   fgpart <stage> [--config cfg.json] [overrides...]
//
// Exit codes: 0 success, 2 usage error, 3 missing artifact, 4 data error.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fgpart/errors.hpp"
#include "fgpart/geometry.hpp"
#include "fgpart/mmp.hpp"
#include "fgpart/parallel.hpp"
#include "fgpart/pipeline.hpp"

namespace {

using namespace fgpart;

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kMissing = 3, kData = 4 };

/// Flags shared by the pipeline stages; each one overrides the config file
/// only when given.
struct Overrides {
  std::string config;
  std::optional<std::string> features, classes, model_dir, output_dir, stack, grouping;
  std::optional<int> pca_dims, components, scales, class_a, class_b, mi_bins;
  std::optional<double> fraction, C, gamma_threshold, nms_iou;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> pca_samples, gmm_samples, top_k;
  std::optional<unsigned> threads;
  bool mask = false;

  void attach(CLI::App* app, bool with_mask) {
    app->add_option("--config", config, "JSON config file");
    app->add_option("--features", features, "PFV1 feature file");
    app->add_option("--classes", classes, "class table JSON");
    app->add_option("--model-dir", model_dir, "model directory");
    app->add_option("--output-dir", output_dir, "report directory");
    app->add_option("--stack", stack, "layer stack preset or file");
    app->add_option("--grouping", grouping, "default | single | per-scale");
    app->add_option("--pca-dims", pca_dims);
    app->add_option("--components", components, "GMM components per scale group");
    app->add_option("--scales", scales, "number of pooling scales N");
    app->add_option("--fraction", fraction, "cluster selection fraction in (0, 1]");
    app->add_option("--C", C, "SVM regularization constant");
    app->add_option("--seed", seed);
    app->add_option("--pca-samples", pca_samples);
    app->add_option("--gmm-samples", gmm_samples);
    app->add_option("--gamma-threshold", gamma_threshold);
    app->add_option("--mi-bins", mi_bins);
    app->add_option("--class-a", class_a, "positive class of the key-part pair");
    app->add_option("--class-b", class_b, "negative class of the key-part pair");
    app->add_option("--top-k", top_k);
    app->add_option("--nms-iou", nms_iou);
    app->add_option("--threads", threads, "worker threads (0 = all cores)");
    if (with_mask) app->add_flag("--mask", mask, "use the cluster selection mask");
  }

  PipelineConfig resolve() const {
    PipelineConfig c = config.empty() ? PipelineConfig{} : PipelineConfig::load(config);
    auto set = [](auto& field, const auto& opt) {
      if (opt) field = *opt;
    };
    set(c.features, features);
    set(c.classes, classes);
    set(c.model_dir, model_dir);
    set(c.output_dir, output_dir);
    set(c.stack, stack);
    set(c.grouping, grouping);
    set(c.pca_dims, pca_dims);
    set(c.components, components);
    set(c.scales, scales);
    set(c.class_a, class_a);
    set(c.class_b, class_b);
    set(c.mi_bins, mi_bins);
    set(c.fraction, fraction);
    set(c.C, C);
    set(c.gamma_threshold, gamma_threshold);
    set(c.nms_iou, nms_iou);
    set(c.seed, seed);
    set(c.pca_samples, pca_samples);
    set(c.gmm_samples, gmm_samples);
    set(c.top_k, top_k);
    set(c.threads, threads);
    if (mask) c.use_mask = true;
    return c;
  }
};

int rf_calc(const std::string& preset, const std::string& stack_file, int cells, std::optional<int> grid, int scale,
            int row, int col) {
  const LayerStack stack = stack_file.empty() ? resolve_stack(preset) : load_stack(stack_file);
  if (cells < 1) throw UsageError("--cells must be >= 1");
  std::cout << receptive_extent(stack, cells) << "\n";
  if (grid) {
    try {
      std::cout << receptive_box(stack, *grid, scale, row, col, true) << "\n";
    } catch (const std::logic_error& e) {
      throw UsageError(e.what());
    }
  }
  return kOk;
}

int mmp_dump(const std::string& features, const std::string& image, std::size_t proposal, const std::string& stack_name,
             bool values) {
  if (features.empty()) throw UsageError("mmp-dump needs --features");
  FeatureReader reader(features);
  while (auto rec = reader.next()) {
    if (!image.empty() && rec->image_id != image) continue;
    if (proposal >= rec->proposals.size()) {
      throw UsageError("image " + rec->image_id + " has " + std::to_string(rec->proposals.size()) + " proposals");
    }
    const auto& p = rec->proposals[proposal];
    const PartSet parts = multi_max_pool(p, resolve_stack(stack_name));
    nlohmann::json out{{"image_id", rec->image_id},
                       {"proposal", proposal},
                       {"grid", p.grid},
                       {"channels", p.channels},
                       {"count", parts.size()}};
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto& pi = parts.parts[i];
      nlohmann::json j{{"scale", pi.scale}, {"row", pi.row}, {"col", pi.col},
                       {"box", {pi.box.x0, pi.box.y0, pi.box.x1, pi.box.y1}}};
      if (values) {
        auto d = parts.descriptor(i);
        j["descriptor"] = std::vector<float>(d.begin(), d.end());
      }
      list.push_back(std::move(j));
    }
    out["parts"] = std::move(list);
    std::cout << out.dump(2) << "\n";
    return kOk;
  }
  throw DataError(image.empty() ? "feature file holds no images" : "image '" + image + "' not found in " + features);
}

int run(int argc, char** argv) {
  CLI::App app{"Annotation-free fine-grained categorization with multi-scale part proposals"};
  app.require_subcommand(1);

  std::vector<std::pair<CLI::App*, std::unique_ptr<Overrides>>> stages;
  const std::pair<const char*, const char*> descriptions[] = {
      {"pca-fit", "fit the PCA reduction on sampled training parts"},
      {"gmm-fit", "fit one GMM per scale group on reduced training parts"},
      {"encode", "encode every image as a scale-pyramid Fisher vector"},
      {"select", "rank part clusters by mutual information and write the selection mask"},
      {"train", "train the one-vs-rest linear SVM"},
      {"eval", "evaluate the classifier on the test split"},
      {"keyparts", "train pairwise part scorers and report the top key parts"},
  };
  for (const auto& [name, desc] : descriptions) {
    auto* sub = app.add_subcommand(name, desc);
    auto o = std::make_unique<Overrides>();
    const std::string n = name;
    o->attach(sub, n == "encode" || n == "train" || n == "eval");
    stages.emplace_back(sub, std::move(o));
  }

  auto* rf = app.add_subcommand("rf-calc", "print the receptive-field extent of T x T cells");
  std::string rf_preset = "vgg-m", rf_stack;
  int rf_cells = 1, rf_scale = 1, rf_row = 0, rf_col = 0;
  std::optional<int> rf_grid;
  rf->add_option("--preset", rf_preset, "layer stack preset")->capture_default_str();
  rf->add_option("--stack", rf_stack, "layer stack file (overrides --preset)");
  rf->add_option("--cells", rf_cells, "window side T in cells")->capture_default_str();
  rf->add_option("--grid", rf_grid, "also print the box of one window on an N x N map");
  rf->add_option("--scale", rf_scale);
  rf->add_option("--row", rf_row);
  rf->add_option("--col", rf_col);

  auto* dump = app.add_subcommand("mmp-dump", "print the part proposals of one object proposal as JSON");
  std::string dump_features, dump_image, dump_stack = "vgg-m";
  std::size_t dump_proposal = 0;
  bool dump_values = false;
  dump->add_option("--features", dump_features, "PFV1 feature file")->required();
  dump->add_option("--image", dump_image, "image id (default: first image)");
  dump->add_option("--proposal", dump_proposal)->capture_default_str();
  dump->add_option("--stack", dump_stack)->capture_default_str();
  dump->add_flag("--values", dump_values, "include pooled descriptors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (rf->parsed()) return rf_calc(rf_preset, rf_stack, rf_cells, rf_grid, rf_scale, rf_row, rf_col);
  if (dump->parsed()) return mmp_dump(dump_features, dump_image, dump_proposal, dump_stack, dump_values);
  for (auto& [sub, o] : stages) {
    if (!sub->parsed()) continue;
    const PipelineConfig cfg = o->resolve();
    set_thread_count(cfg.threads);
    run_stage(sub->get_name(), cfg, std::cerr);
    return kOk;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return kMissing;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
}
