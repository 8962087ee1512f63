#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "run_config.hpp"
#include "vym/checkpoint.hpp"
#include "vym/dataset.hpp"
#include "vym/error.hpp"
#include "vym/image.hpp"
#include "vym/metrics.hpp"
#include "vym/random.hpp"

namespace vym::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModelSidecar = "model.json";
constexpr const char* kModelParams = "params.json";

std::uint64_t model_seed(std::uint64_t seed) { return derive_seed(seed, hash_name("model-init")); }

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError(DataError::Kind::kIo, "write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::kMissingFile, "cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError(DataError::Kind::kMalformed, path.string() + " is not valid JSON");
  return j;
}

fs::path reference_path(const RunConfig& c) {
  if (!c.preprocess.reference_image.empty()) return c.preprocess.reference_image;
  return c.paths.manifest.parent_path() / "reference.png";
}

fs::path require_manifest(const RunConfig& c) {
  if (c.paths.manifest.empty()) throw UsageError("a manifest is required (--manifest or paths.manifest)");
  return c.paths.manifest;
}

std::string cache_key(const std::string& example_key, std::size_t view) {
  return example_key + "/" + view_code(kViewOrder[view]);
}

// Preprocessed examples, from the tensor cache when one is configured.
std::vector<PreparedExample> load_examples(const RunConfig& c, const Manifest& manifest) {
  if (c.paths.cache.empty()) {
    return prepare_examples(manifest, read_image(reference_path(c)), c.preprocess);
  }
  const auto tensors = load_parameters(c.paths.cache);
  const Shape want{3, c.preprocess.target_side, c.preprocess.target_side};
  std::vector<PreparedExample> out;
  for (const auto& e : manifest.examples) {
    PreparedExample p;
    p.plant = e.plant;
    p.cordon = e.cordon;
    p.weight_g = e.weight_g;
    for (std::size_t v = 0; v < 4; ++v) {
      const auto it = tensors.find(cache_key(e.key(), v));
      if (it == tensors.end()) {
        throw DataError(DataError::Kind::kIncompleteExample,
                        "cache " + c.paths.cache.string() + " has no entry " + cache_key(e.key(), v));
      }
      if (it->second.shape() != want) {
        throw DataError(DataError::Kind::kMalformed, "cache entry " + it->first + " has shape " +
                                                         shape_str(it->second.shape()) + ", expected " +
                                                         shape_str(want));
      }
      p.views[v] = it->second;
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string mode_file_tag(const std::string& mode) {
  std::string s = mode;
  for (auto& ch : s) {
    if (ch == ':') ch = '-';
  }
  return s;
}

std::string fmt(double v, int decimals) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(decimals) << v;
  return o.str();
}

void print_report(const CvReport& r, std::ostream& out) {
  const Mode mode = Mode::parse(r.mode);
  out << "mode " << r.mode;
  if (mode.kind == Mode::Kind::kSingleView) out << " (" << mode.label() << " in every channel)";
  out << ", " << r.plan.k << "-fold, plan " << r.plan.fingerprint() << "\n";
  out << std::left << std::setw(6) << "fold" << std::setw(8) << "n_test" << std::setw(12) << "MAE_g"
      << std::setw(10) << "accuracy" << std::setw(9) << "epochs" << "recon_mse\n";
  for (const auto& f : r.folds) {
    out << std::left << std::setw(6) << f.fold << std::setw(8) << f.n_test << std::setw(12) << fmt(f.mae_g, 2)
        << std::setw(10) << fmt(f.mean_accuracy, 4) << std::setw(9) << f.epochs_trained
        << (f.reconstruction_mse ? fmt(*f.reconstruction_mse, 5) : std::string("-")) << "\n";
  }
  out << "aggregate MAE " << fmt(r.aggregate_mae_g, 2) << " g (95% CI " << fmt(r.ci95_mae_g, 2) << ")"
      << ", mean weight " << fmt(r.mean_weight_g, 2) << " g"
      << ", mean accuracy " << fmt(r.aggregate_mean_accuracy, 4) << " pooled / " << fmt(r.mean_fold_accuracy, 4)
      << " fold mean";
  if (r.reconstruction_mse) out << ", recon MSE/pixel " << fmt(*r.reconstruction_mse, 5);
  out << "\n";
  for (const auto& c : r.comparisons) {
    out << "vs " << c.other_mode << ": mean fold MAE difference " << (c.mean_fold_mae_difference_g >= 0 ? "+" : "")
        << fmt(c.mean_fold_mae_difference_g, 2) << " g, confidence " << r.mode << " is better "
        << fmt(c.confidence_this_better, 4) << "\n";
  }
}

// Shared option plumbing for every subcommand.
struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string manifest, out, cache, mode;
  std::optional<std::size_t> folds, n;
  std::optional<std::size_t> side;

  void add(CLI::App* app, bool with_data) {
    app->add_option("--config", config_file, "JSON run configuration");
    app->add_option("--set", sets, "Override a config value: section.key=value (repeatable)");
    app->add_option("--seed", seed, "Master seed (fallback: VYM_SEED)");
    if (with_data) {
      app->add_option("--manifest", manifest, "Dataset manifest CSV");
      app->add_option("--cache", cache, "Preprocessed tensor cache");
      app->add_option("--side", side, "Preprocessed image side (preprocess.target_side)");
    }
  }

  RunConfig resolve(const std::string& env_seed) const {
    ConfigSources s;
    if (!config_file.empty()) s.file = config_file;
    s.overrides = sets;
    if (!manifest.empty()) s.overrides.push_back("paths.manifest=" + manifest);
    if (!out.empty()) s.overrides.push_back("paths.out=" + out);
    if (!cache.empty()) s.overrides.push_back("paths.cache=" + cache);
    if (!mode.empty()) s.overrides.push_back("mode=" + mode);
    if (folds) s.overrides.push_back("folds=" + std::to_string(*folds));
    if (n) s.overrides.push_back("n_examples=" + std::to_string(*n));
    if (side) s.overrides.push_back("preprocess.target_side=" + std::to_string(*side));
    s.seed_flag = seed;
    if (!env_seed.empty()) s.seed_env = env_seed;
    return resolve_config(s);
  }
};

int cmd_synth(const RunConfig& c, std::ostream& out) {
  if (c.paths.out.empty()) throw UsageError("synth needs --out");
  if (c.n_examples < 1) throw UsageError("synth needs --n >= 1");
  const auto manifest = generate_dataset(c.n_examples, c.synth, c.paths.out);
  out << manifest.generic_string() << "\n";
  return kOk;
}

int cmd_preprocess(const RunConfig& c, std::ostream& out) {
  if (c.paths.out.empty()) throw UsageError("preprocess needs --out");
  const Manifest m = load_manifest(require_manifest(c));
  const auto examples = prepare_examples(m, read_image(reference_path(c)), c.preprocess);
  std::vector<Parameter> entries;
  for (const auto& e : examples) {
    for (std::size_t v = 0; v < 4; ++v) entries.push_back({cache_key(e.key(), v), e.views[v]});
  }
  if (c.paths.out.has_parent_path()) fs::create_directories(c.paths.out.parent_path());
  save_parameters(c.paths.out, entries);
  out << "cached " << examples.size() << " examples (" << entries.size() << " tensors) to "
      << c.paths.out.generic_string() << "\n";
  return kOk;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  if (c.paths.out.empty()) throw UsageError("train needs --out");
  const Manifest m = load_manifest(require_manifest(c));
  if (m.examples.empty()) throw DataError(DataError::Kind::kInvalidArgument, "manifest has no examples");
  const auto examples = load_examples(c, m);
  const Mode mode = Mode::parse(c.mode);
  const ModelConfig mc = mode.apply(c.model);

  std::vector<std::size_t> all(examples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto [fit_idx, val_idx] = split_validation(m.examples, all, c.train.validation_fraction, c.seed);
  ExampleRefs fit, val;
  for (auto i : fit_idx) fit.push_back(&examples[i]);
  for (auto i : val_idx) val.push_back(&examples[i]);

  MtlModel model = build_model(mc, model_seed(c.seed));
  const auto result = train_one(model, fit, val, c.train, mode);

  fs::create_directories(c.paths.out);
  save_parameters(c.paths.out / kModelParams, model.parameters());
  const fs::path ref = fs::absolute(reference_path(c));
  PreprocessConfig pc = c.preprocess;
  pc.reference_image = ref;
  json sidecar = {{"format", "vym-model-v1"},
                  {"mode", mode.str()},
                  {"model", mc.to_json()},
                  {"preprocess", preprocess_to_json(pc)},
                  {"canvas", {m.canvas.width, m.canvas.height}},
                  {"epochs_trained", result.epochs_trained},
                  {"best_epoch", result.best_epoch},
                  {"best_validation_loss", result.best_validation_loss},
                  {"run_config", c.to_json()}};
  write_json(c.paths.out / kModelSidecar, sidecar);

  std::vector<double> p, t;
  for (const auto& e : examples) {
    p.push_back(predict_yield(model, mode.inputs(e)));
    t.push_back(e.weight_g);
  }
  out << "trained " << mode.str() << " on " << fit.size() << " examples (" << val.size() << " validation), "
      << result.epochs_trained << " epochs, best epoch " << result.best_epoch << "\n"
      << "training-set MAE " << fmt(mae(p, t), 2) << " g\n"
      << "wrote " << (c.paths.out / kModelParams).generic_string() << "\n";
  return kOk;
}

int cmd_cv(const RunConfig& c, std::ostream& out) {
  if (c.paths.out.empty()) throw UsageError("cv needs --out");
  const Manifest m = load_manifest(require_manifest(c));
  if (m.examples.empty()) throw DataError(DataError::Kind::kInvalidArgument, "manifest has no examples");
  const auto examples = load_examples(c, m);
  const Mode mode = Mode::parse(c.mode);
  const ModelConfig mc = mode.apply(c.model);
  const FoldPlan plan = make_folds(m.examples, c.folds, c.seed);
  const std::uint64_t init = model_seed(c.seed);
  CvReport report = cross_validate(
      examples, [&](std::size_t f) { return build_model(mc, derive_seed(init, f)); }, plan, c.train, mode);
  report.run_config = c.to_json();
  report.run_config["command"] = "cv";

  fs::create_directories(c.paths.out);
  const std::string own = "report-" + mode_file_tag(mode.str()) + ".json";
  std::vector<fs::path> siblings;
  for (const auto& entry : fs::directory_iterator(c.paths.out)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("report-", 0) == 0 && entry.path().extension() == ".json" && name != own) {
      siblings.push_back(entry.path());
    }
  }
  std::sort(siblings.begin(), siblings.end());
  for (const auto& s : siblings) {
    CvReport other;
    try {
      other = CvReport::from_json(read_json(s));
    } catch (const DataError&) {
      continue;
    }
    if (other.mode == report.mode || other.plan.fingerprint() != plan.fingerprint()) continue;
    report.comparisons.push_back(compare_reports(report, other));
  }
  const json j = report.to_json();
  write_json(c.paths.out / own, j);
  write_json(c.paths.out / "report.json", j);
  print_report(report, out);
  return kOk;
}

int cmd_predict(const fs::path& model_dir, const std::vector<std::string>& images, std::ostream& out) {
  if (images.size() != 4) {
    throw UsageError("predict needs exactly 4 images in E1 E2 W1 W2 order, got " + std::to_string(images.size()));
  }
  const json sidecar = read_json(model_dir / kModelSidecar);
  ModelConfig mc;
  PreprocessConfig pc;
  CanvasSize canvas;
  Mode mode;
  try {
    mc = ModelConfig::from_json(sidecar.at("model"));
    pc = preprocess_from_json(sidecar.at("preprocess"), PreprocessConfig{});
    canvas = {sidecar.at("canvas").at(0).get<std::size_t>(), sidecar.at("canvas").at(1).get<std::size_t>()};
    mode = Mode::parse(sidecar.at("mode").get<std::string>());
  } catch (const json::exception& e) {
    throw DataError(DataError::Kind::kMalformed, "model sidecar: " + std::string(e.what()));
  }
  MtlModel model = build_model(mc, 0);
  assign_parameters(model.parameters(), load_parameters(model_dir / kModelParams));

  std::array<RgbImage, 4> imgs;
  for (std::size_t v = 0; v < 4; ++v) {
    imgs[v] = read_image(images[v]);
    // Larger crops than any training crop still fit, at the cost of scale.
    canvas.width = std::max(canvas.width, imgs[v].width());
    canvas.height = std::max(canvas.height, imgs[v].height());
  }
  PreparedExample e;
  e.views = preprocess_example(imgs, read_image(pc.reference_image), canvas, pc);
  const double grams = predict_yield(model, mode.inputs(e));
  out << fmt(grams, 2) << "\n";
  return kOk;
}

// Inputs on the top row, reconstructions below, one column per view.
RgbImage reconstruction_grid(const std::array<Tensor, 4>& inputs, const std::vector<Tensor>& recon) {
  const std::size_t side = inputs[0].dim(1), gap = 2;
  RgbImage grid(4 * side + 3 * gap, 2 * side + gap, Rgb{255, 255, 255});
  for (std::size_t v = 0; v < 4; ++v) {
    for (std::size_t row = 0; row < 2; ++row) {
      const RgbImage tile = tensor_to_image(row == 0 ? inputs[v] : recon[v]);
      for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) grid.set(v * (side + gap) + x, row * (side + gap) + y, tile.at(x, y));
      }
    }
  }
  return grid;
}

int cmd_report(const fs::path& report_path, const fs::path& grid, const fs::path& model_dir,
               const std::string& example_key, const RunConfig& c, std::ostream& out) {
  const CvReport r = CvReport::from_json(read_json(report_path));
  print_report(r, out);
  if (grid.empty()) return kOk;
  if (model_dir.empty()) throw UsageError("--grid needs --model");
  const json sidecar = read_json(model_dir / kModelSidecar);
  const ModelConfig mc = ModelConfig::from_json(sidecar.at("model"));
  if (!mc.with_decoders) throw DataError(DataError::Kind::kInvalidArgument, "model has no decoders to render");
  MtlModel model = build_model(mc, 0);
  assign_parameters(model.parameters(), load_parameters(model_dir / kModelParams));
  RunConfig rc = c;
  rc.preprocess = preprocess_from_json(sidecar.at("preprocess"), PreprocessConfig{});
  const Manifest m = load_manifest(require_manifest(rc));
  if (m.examples.empty()) throw DataError(DataError::Kind::kInvalidArgument, "manifest has no examples");
  std::size_t pick = 0;
  if (!example_key.empty()) {
    pick = m.examples.size();
    for (std::size_t i = 0; i < m.examples.size(); ++i) {
      if (m.examples[i].key() == example_key) pick = i;
    }
    if (pick == m.examples.size()) throw DataError(DataError::Kind::kInvalidArgument, "no example " + example_key);
  }
  Manifest one{{m.examples[pick]}, m.canvas};
  const auto prepared = prepare_examples(one, read_image(rc.preprocess.reference_image), rc.preprocess);
  const auto fwd = model.forward(prepared[0].views);
  write_image(grid, reconstruction_grid(prepared[0].views, fwd.reconstructions));
  out << "example " << m.examples[pick].key() << ": recon MSE/pixel "
      << fmt(per_pixel_mse(fwd.reconstructions, prepared[0].views), 5) << ", wrote " << grid.generic_string()
      << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const std::string& env_seed) {
  CLI::App app{"Multi-view grape yield estimation"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  common.add(synth, false);
  synth->add_option("--n", common.n, "Number of cordon examples");
  synth->add_option("--out", common.out, "Output directory");

  auto* pre = app.add_subcommand("preprocess", "Write the preprocessed tensor cache");
  common.add(pre, true);
  pre->add_option("--out", common.out, "Cache file");

  auto* train = app.add_subcommand("train", "Train one model and write a checkpoint");
  common.add(train, true);
  train->add_option("--mode", common.mode, "mtl | stl | single-view:<E|W><1|2>");
  train->add_option("--out", common.out, "Model directory");

  auto* cv = app.add_subcommand("cv", "k-fold cross-validation report");
  common.add(cv, true);
  cv->add_option("--mode", common.mode, "mtl | stl | single-view:<E|W><1|2>");
  cv->add_option("--k", common.folds, "Fold count");
  cv->add_option("--out", common.out, "Report directory");

  std::string model_dir;
  std::vector<std::string> images;
  auto* predict = app.add_subcommand("predict", "Predict grams for one cordon");
  predict->add_option("--model", model_dir, "Model directory written by train")->required();
  predict->add_option("images", images, "Four images in E1 E2 W1 W2 order");

  std::string report_path, grid, example_key;
  auto* report = app.add_subcommand("report", "Render a report as text, optionally a reconstruction grid");
  common.add(report, true);
  report->add_option("--report", report_path, "report.json")->required();
  report->add_option("--grid", grid, "PNG with inputs above reconstructions");
  report->add_option("--model", model_dir, "Model directory for --grid");
  report->add_option("--example", example_key, "Example key for --grid, e.g. 3N");

  std::vector<const char*> argv{"vym"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (predict->parsed()) return cmd_predict(model_dir, images, out);
    const RunConfig c = common.resolve(env_seed);
    if (synth->parsed()) return cmd_synth(c, out);
    if (pre->parsed()) return cmd_preprocess(c, out);
    if (train->parsed()) return cmd_train(c, out);
    if (cv->parsed()) return cmd_cv(c, out);
    if (report->parsed()) return cmd_report(report_path, grid, model_dir, example_key, c, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace vym::cli
