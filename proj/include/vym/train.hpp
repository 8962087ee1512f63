#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vym/dataset.hpp"
#include "vym/model.hpp"

namespace vym {

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  std::size_t patience = 25;
  std::uint64_t seed = 7;
  double validation_fraction = 0.2;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }
};

/// One cordon with its four preprocessed views in (E,1),(E,2),(W,1),(W,2) order.
struct PreparedExample {
  int plant = 0;
  Cordon cordon = Cordon::kNorth;
  std::array<Tensor, 4> views;
  double weight_g = 0.0;

  std::string key() const;
};

/// Preprocesses every manifest example.
std::vector<PreparedExample> prepare_examples(const Manifest& manifest, const RgbImage& reference,
                                              const PreprocessConfig& config);

/// Experiment mode: four-view multi-task, four-view single-task, or one
/// view duplicated into every channel (single-task).
struct Mode {
  enum class Kind { kMtl, kStl, kSingleView };
  Kind kind = Kind::kMtl;
  View view;

  static Mode parse(const std::string& text);  // "mtl", "stl", "single-view:E1"
  std::string str() const;
  /// "#E1"-style label for single views, else the mode name.
  std::string label() const;
  ModelConfig apply(ModelConfig config) const;
  std::array<Tensor, 4> inputs(const PreparedExample& example) const;
};

/// Tracks validation loss; stop once `patience` epochs pass without a
/// strict improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience);
  /// Records one epoch's validation loss; true when it is a new best.
  bool update(double loss);
  bool should_stop() const noexcept { return since_best_ >= patience_; }
  double best() const noexcept { return best_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t since_best_ = 0;
  std::size_t best_epoch_ = 0;
  double best_;
};

struct TrainResult {
  std::size_t epochs_trained = 0;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
  std::vector<double> train_loss;        // total objective, per epoch
  std::vector<double> train_yield_loss;  // yield term only, per epoch
  std::vector<double> validation_loss;   // yield-only, per epoch
};

using ExampleRefs = std::vector<const PreparedExample*>;

/// Mean scaled squared yield error over examples.
double yield_loss(const MtlModel& model, const ExampleRefs& examples, const Mode& mode);

/// Adam over mini-batches of mtl_loss; evaluates validation yield loss after
/// every epoch and finally restores the best-validation parameters.
TrainResult train_one(MtlModel& model, const ExampleRefs& train, const ExampleRefs& validation,
                      const TrainConfig& config, const Mode& mode);

struct PredictionRecord {
  std::string key;
  int plant = 0;
  Cordon cordon = Cordon::kNorth;
  std::size_t fold = 0;
  double truth_g = 0.0;
  double predicted_g = 0.0;
};

struct FoldResult {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  std::size_t n_test = 0;
  double mae_g = 0.0;
  double test_mean_weight_g = 0.0;
  double mean_accuracy = 0.0;
  std::optional<double> reconstruction_mse;
  std::size_t epochs_trained = 0;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
};

struct PairedComparison {
  std::string other_mode;
  double mean_fold_mae_difference_g = 0.0;  // other - this
  double confidence_this_better = 0.0;
};

struct CvReport {
  std::string mode;
  FoldPlan plan;
  std::vector<FoldResult> folds;
  std::vector<PredictionRecord> predictions;
  double aggregate_mae_g = 0.0;
  double mean_weight_g = 0.0;
  double aggregate_mean_accuracy = 0.0;  // against the pooled test-set mean
  double mean_fold_accuracy = 0.0;       // average of per-fold accuracies
  double ci95_mae_g = 0.0;
  std::optional<double> reconstruction_mse;
  std::vector<PairedComparison> comparisons;
  nlohmann::json run_config;

  std::vector<double> fold_maes() const;
  nlohmann::json to_json() const;
  static CvReport from_json(const nlohmann::json& j);
};

using ModelFactory = std::function<MtlModel(std::size_t fold)>;

/// k-fold CV over a shared fold plan. Folds run in parallel, each with its
/// own model replica and derived seed; the report is independent of thread
/// count.
CvReport cross_validate(const std::vector<PreparedExample>& examples, const ModelFactory& factory,
                        const FoldPlan& plan, const TrainConfig& config, const Mode& mode);

/// Pairs two reports fold by fold; throws when their fold plans differ.
PairedComparison compare_reports(const CvReport& self, const CvReport& other);

}  // namespace vym
