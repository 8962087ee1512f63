#include "vym/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include "vym/error.hpp"
#include "vym/metrics.hpp"
#include "vym/ops.hpp"
#include "vym/random.hpp"

namespace vym {

void TrainConfig::validate() const {
  if (batch_size < 1) throw DataError(DataError::Kind::kInvalidArgument, "train: batch_size must be >= 1");
  if (epochs < 1) throw DataError(DataError::Kind::kInvalidArgument, "train: epochs must be >= 1");
  if (patience < 1 || patience >= epochs) {
    throw DataError(DataError::Kind::kInvalidArgument, "train: patience must be in [1, epochs)");
  }
  if (!(learning_rate > 0.0)) throw DataError(DataError::Kind::kInvalidArgument, "train: learning_rate must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 0.5)) {
    throw DataError(DataError::Kind::kInvalidArgument, "train: validation_fraction must be in (0, 0.5)");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"patience", patience},
          {"seed", seed},
          {"validation_fraction", validation_fraction}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("learning_rate", c.learning_rate);
  get("patience", c.patience);
  get("seed", c.seed);
  get("validation_fraction", c.validation_fraction);
  return c;
}

std::string PreparedExample::key() const { return std::to_string(plant) + static_cast<char>(cordon); }

std::vector<PreparedExample> prepare_examples(const Manifest& manifest, const RgbImage& reference,
                                              const PreprocessConfig& config) {
  std::vector<PreparedExample> out(manifest.examples.size());
  std::vector<std::exception_ptr> errors(out.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(out.size()); ++i) {
    try {
      const auto& e = manifest.examples[static_cast<std::size_t>(i)];
      std::array<RgbImage, 4> imgs;
      for (std::size_t v = 0; v < 4; ++v) imgs[v] = read_image(e.images[v]);
      auto& p = out[static_cast<std::size_t>(i)];
      p.plant = e.plant;
      p.cordon = e.cordon;
      p.weight_g = e.weight_g;
      p.views = preprocess_example(imgs, reference, manifest.canvas, config);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Mode Mode::parse(const std::string& text) {
  if (text == "mtl") return {Kind::kMtl, {}};
  if (text == "stl") return {Kind::kStl, {}};
  const std::string prefix = "single-view:";
  if (text.rfind(prefix, 0) == 0) return {Kind::kSingleView, parse_view_code(text.substr(prefix.size()))};
  throw DataError(DataError::Kind::kInvalidArgument,
                  "unknown mode '" + text + "' (expected mtl, stl or single-view:<E|W><1|2>)");
}

std::string Mode::str() const {
  switch (kind) {
    case Kind::kMtl:
      return "mtl";
    case Kind::kStl:
      return "stl";
    case Kind::kSingleView:
      return "single-view:" + view_code(view);
  }
  return "?";
}

std::string Mode::label() const {
  if (kind != Kind::kSingleView) return str();
  return "#" + view_code(view);
}

ModelConfig Mode::apply(ModelConfig config) const {
  return kind == Kind::kMtl ? config : stl_variant(std::move(config));
}

std::array<Tensor, 4> Mode::inputs(const PreparedExample& example) const {
  if (kind == Kind::kSingleView) return single_view_inputs(example.views, view);
  return example.views;
}

EarlyStopper::EarlyStopper(std::size_t patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {}

bool EarlyStopper::update(double loss) {
  const std::size_t epoch = epoch_++;
  if (loss < best_) {
    best_ = loss;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

double yield_loss(const MtlModel& model, const ExampleRefs& examples, const Mode& mode) {
  if (examples.empty()) throw DataError(DataError::Kind::kInvalidArgument, "yield_loss: no examples");
  const double s = model.config().target_scale_g;
  double acc = 0.0;
  for (const auto* e : examples) {
    const auto inputs = mode.inputs(*e);
    const double d = model.forward_yield(inputs).item() - e->weight_g / s;
    acc += d * d;
  }
  return acc / static_cast<double>(examples.size());
}

TrainResult train_one(MtlModel& model, const ExampleRefs& train, const ExampleRefs& validation,
                      const TrainConfig& config, const Mode& mode) {
  config.validate();
  if (train.empty() || validation.empty()) {
    throw DataError(DataError::Kind::kInvalidArgument, "train_one: training and validation sets must be non-empty");
  }
  const ModelConfig& mc = model.config();
  auto trainable = model.trainable_parameters();
  AdamState adam(config.learning_rate);
  EarlyStopper stopper(config.patience);
  auto best = model.snapshot();
  TrainResult result;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, epoch));
    rng.shuffle(order.begin(), order.end());
    double total = 0.0, yield_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      zero_grads(model.parameters());
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = *train[order[b]];
        const auto inputs = mode.inputs(ex);
        const auto out = model.forward(inputs);
        const Tensor loss = mtl_loss(out, inputs, ex.weight_g, mc);
        const double l = loss.item();
        if (!std::isfinite(l)) {
          throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                             " on example " + ex.key());
        }
        const double d = out.yield_scaled.item() - ex.weight_g / mc.target_scale_g;
        total += l;
        yield_total += d * d;
        backward(scale(loss, inv));
      }
      optimizer_step(trainable, adam);
    }
    const double n = static_cast<double>(train.size());
    result.train_loss.push_back(total / n);
    result.train_yield_loss.push_back(yield_total / n);

    const double val = yield_loss(model, validation, mode);
    if (!std::isfinite(val)) {
      throw NumericError("training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.validation_loss.push_back(val);
    ++result.epochs_trained;
    if (stopper.update(val)) best = model.snapshot();
    if (stopper.should_stop()) break;
  }
  model.restore(best);
  result.best_epoch = stopper.best_epoch();
  result.best_validation_loss = stopper.best();
  return result;
}

std::vector<double> CvReport::fold_maes() const {
  std::vector<double> out;
  for (const auto& f : folds) out.push_back(f.mae_g);
  return out;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

nlohmann::json CvReport::to_json() const {
  nlohmann::json j;
  j["mode"] = mode;
  j["fold_plan"] = plan.to_json();
  j["aggregate"] = {{"mae_g", aggregate_mae_g},
                    {"mean_weight_g", mean_weight_g},
                    {"mean_accuracy", aggregate_mean_accuracy},
                    {"mean_fold_accuracy", mean_fold_accuracy},
                    {"ci95_fold_mae_g", ci95_mae_g},
                    {"reconstruction_mse", optional_json(reconstruction_mse)}};
  auto& fj = j["folds"] = nlohmann::json::array();
  for (const auto& f : folds) {
    fj.push_back({{"fold", f.fold},
                  {"n_train", f.n_train},
                  {"n_validation", f.n_validation},
                  {"n_test", f.n_test},
                  {"mae_g", f.mae_g},
                  {"test_mean_weight_g", f.test_mean_weight_g},
                  {"mean_accuracy", f.mean_accuracy},
                  {"reconstruction_mse", optional_json(f.reconstruction_mse)},
                  {"epochs_trained", f.epochs_trained},
                  {"best_epoch", f.best_epoch},
                  {"best_validation_loss", f.best_validation_loss}});
  }
  auto& pj = j["predictions"] = nlohmann::json::array();
  for (const auto& p : predictions) {
    pj.push_back({{"key", p.key},
                  {"plant", p.plant},
                  {"cordon", std::string(1, static_cast<char>(p.cordon))},
                  {"fold", p.fold},
                  {"truth_g", p.truth_g},
                  {"predicted_g", p.predicted_g}});
  }
  auto& cj = j["comparisons"] = nlohmann::json::array();
  for (const auto& c : comparisons) {
    cj.push_back({{"other_mode", c.other_mode},
                  {"mean_fold_mae_difference_g", c.mean_fold_mae_difference_g},
                  {"confidence_this_better", c.confidence_this_better}});
  }
  j["run_config"] = run_config;
  return j;
}

CvReport CvReport::from_json(const nlohmann::json& j) {
  CvReport r;
  try {
    r.mode = j.at("mode").get<std::string>();
    r.plan = FoldPlan::from_json(j.at("fold_plan"));
    const auto& a = j.at("aggregate");
    r.aggregate_mae_g = a.at("mae_g").get<double>();
    r.mean_weight_g = a.at("mean_weight_g").get<double>();
    r.aggregate_mean_accuracy = a.at("mean_accuracy").get<double>();
    r.mean_fold_accuracy = a.at("mean_fold_accuracy").get<double>();
    r.ci95_mae_g = a.at("ci95_fold_mae_g").get<double>();
    r.reconstruction_mse = optional_from(a.at("reconstruction_mse"));
    for (const auto& f : j.at("folds")) {
      FoldResult fr;
      fr.fold = f.at("fold").get<std::size_t>();
      fr.n_train = f.at("n_train").get<std::size_t>();
      fr.n_validation = f.at("n_validation").get<std::size_t>();
      fr.n_test = f.at("n_test").get<std::size_t>();
      fr.mae_g = f.at("mae_g").get<double>();
      fr.test_mean_weight_g = f.at("test_mean_weight_g").get<double>();
      fr.mean_accuracy = f.at("mean_accuracy").get<double>();
      fr.reconstruction_mse = optional_from(f.at("reconstruction_mse"));
      fr.epochs_trained = f.at("epochs_trained").get<std::size_t>();
      fr.best_epoch = f.at("best_epoch").get<std::size_t>();
      fr.best_validation_loss = f.at("best_validation_loss").get<double>();
      r.folds.push_back(fr);
    }
    for (const auto& p : j.at("predictions")) {
      PredictionRecord pr;
      pr.key = p.at("key").get<std::string>();
      pr.plant = p.at("plant").get<int>();
      pr.cordon = static_cast<Cordon>(p.at("cordon").get<std::string>().at(0));
      pr.fold = p.at("fold").get<std::size_t>();
      pr.truth_g = p.at("truth_g").get<double>();
      pr.predicted_g = p.at("predicted_g").get<double>();
      r.predictions.push_back(pr);
    }
    for (const auto& c : j.at("comparisons")) {
      r.comparisons.push_back({c.at("other_mode").get<std::string>(),
                               c.at("mean_fold_mae_difference_g").get<double>(),
                               c.at("confidence_this_better").get<double>()});
    }
    r.run_config = j.value("run_config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Kind::kMalformed, std::string("malformed report: ") + e.what());
  }
  return r;
}

CvReport cross_validate(const std::vector<PreparedExample>& examples, const ModelFactory& factory,
                        const FoldPlan& plan, const TrainConfig& config, const Mode& mode) {
  config.validate();
  if (examples.empty()) throw DataError(DataError::Kind::kInvalidArgument, "cross_validate: no examples");
  std::vector<CordonExample> meta(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    meta[i].plant = examples[i].plant;
    meta[i].cordon = examples[i].cordon;
    meta[i].weight_g = examples[i].weight_g;
  }

  const std::size_t k = plan.k;
  std::vector<FoldResult> folds(k);
  std::vector<std::vector<std::pair<std::size_t, double>>> preds(k);
  std::vector<std::exception_ptr> errors(k);

#pragma omp parallel for schedule(dynamic, 1)
  for (long fl = 0; fl < static_cast<long>(k); ++fl) {
    const auto f = static_cast<std::size_t>(fl);
    try {
      const auto test_idx = plan.test_indices(meta, f);
      const auto [train_idx, val_idx] =
          split_validation(meta, plan.train_indices(meta, f), config.validation_fraction,
                           derive_seed(config.seed, f));
      auto refs = [&](const std::vector<std::size_t>& idx) {
        ExampleRefs r;
        for (auto i : idx) r.push_back(&examples[i]);
        return r;
      };
      TrainConfig fold_cfg = config;
      fold_cfg.seed = derive_seed(config.seed, 1000 + f);
      MtlModel model = factory(f);
      const auto tr = train_one(model, refs(train_idx), refs(val_idx), fold_cfg, mode);

      FoldResult& fr = folds[f];
      fr.fold = f;
      fr.n_train = train_idx.size();
      fr.n_validation = val_idx.size();
      fr.n_test = test_idx.size();
      fr.epochs_trained = tr.epochs_trained;
      fr.best_epoch = tr.best_epoch;
      fr.best_validation_loss = tr.best_validation_loss;
      std::vector<double> p, t;
      double recon = 0.0;
      const bool has_decoders = model.config().with_decoders;
      for (auto i : test_idx) {
        const auto inputs = mode.inputs(examples[i]);
        double pred = 0.0;
        if (has_decoders) {
          const auto out = model.forward(inputs);
          pred = scaled_to_grams(out.yield_scaled.item(), model.config().target_scale_g);
          recon += per_pixel_mse(out.reconstructions, inputs);
        } else {
          pred = predict_yield(model, inputs);
        }
        p.push_back(pred);
        t.push_back(examples[i].weight_g);
        preds[f].emplace_back(i, pred);
      }
      fr.mae_g = mae(p, t);
      fr.test_mean_weight_g = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
      fr.mean_accuracy = fr.test_mean_weight_g > 0.0 ? mean_accuracy(fr.mae_g, fr.test_mean_weight_g) : 0.0;
      if (has_decoders) fr.reconstruction_mse = recon / static_cast<double>(test_idx.size());
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  CvReport report;
  report.mode = mode.str();
  report.plan = plan;
  report.folds = folds;
  std::vector<std::pair<std::size_t, PredictionRecord>> all;
  for (std::size_t f = 0; f < k; ++f) {
    for (const auto& [i, pred] : preds[f]) {
      all.push_back({i, {examples[i].key(), examples[i].plant, examples[i].cordon, f,
                         examples[i].weight_g, pred}});
    }
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> p, t;
  for (auto& [i, rec] : all) {
    p.push_back(rec.predicted_g);
    t.push_back(rec.truth_g);
    report.predictions.push_back(std::move(rec));
  }
  report.aggregate_mae_g = mae(p, t);
  report.mean_weight_g = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
  report.aggregate_mean_accuracy =
      report.mean_weight_g > 0.0 ? mean_accuracy(report.aggregate_mae_g, report.mean_weight_g) : 0.0;
  double acc = 0.0, recon = 0.0;
  std::size_t recon_n = 0;
  for (const auto& f : folds) {
    acc += f.mean_accuracy;
    if (f.reconstruction_mse) {
      recon += *f.reconstruction_mse * static_cast<double>(f.n_test);
      recon_n += f.n_test;
    }
  }
  report.mean_fold_accuracy = acc / static_cast<double>(k);
  if (recon_n) report.reconstruction_mse = recon / static_cast<double>(recon_n);
  report.ci95_mae_g = ci95(report.fold_maes());
  return report;
}

PairedComparison compare_reports(const CvReport& self, const CvReport& other) {
  if (self.plan.k != other.plan.k || self.plan.fingerprint() != other.plan.fingerprint()) {
    throw DataError(DataError::Kind::kInvalidArgument,
                    "compare_reports: mismatched fold plans (" + self.plan.fingerprint() + " vs " +
                        other.plan.fingerprint() + ")");
  }
  const auto a = self.fold_maes();
  const auto b = other.fold_maes();
  PairedComparison c;
  c.other_mode = other.mode;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += b[i] - a[i];
  c.mean_fold_mae_difference_g = d / static_cast<double>(a.size());
  c.confidence_this_better = paired_fold_comparison(a, b);
  return c;
}

}  // namespace vym
