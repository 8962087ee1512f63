#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support/gradcheck.hpp"
#include "vym/error.hpp"
#include "vym/metrics.hpp"
#include "vym/train.hpp"

namespace vym {
namespace {

ModelConfig small_config() { return ModelConfig::for_input_side(16, {3, 4, 4, 6}, {6, 4}, 6); }

// Brightness of the views carries the weight, so the task is learnable.
std::vector<PreparedExample> toy_examples(int plants, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PreparedExample> out;
  for (int p = 1; p <= plants; ++p) {
    for (Cordon c : {Cordon::kNorth, Cordon::kSouth}) {
      PreparedExample e;
      e.plant = p;
      e.cordon = c;
      const double level = rng.uniform(0.2, 0.8);
      e.weight_g = 600.0 + 1000.0 * level;
      for (auto& v : e.views) {
        std::vector<double> px(3 * 16 * 16);
        for (auto& x : px) x = std::clamp(level + 0.1 * rng.uniform(-1.0, 1.0), 0.0, 1.0);
        v = Tensor::from({3, 16, 16}, std::move(px));
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::vector<CordonExample> meta_of(const std::vector<PreparedExample>& ex) {
  std::vector<CordonExample> m(ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    m[i].plant = ex[i].plant;
    m[i].cordon = ex[i].cordon;
    m[i].weight_g = ex[i].weight_g;
  }
  return m;
}

ExampleRefs refs_of(const std::vector<PreparedExample>& ex, std::size_t from, std::size_t to) {
  ExampleRefs r;
  for (std::size_t i = from; i < to; ++i) r.push_back(&ex[i]);
  return r;
}

TEST(EarlyStopperTest, StopsAfterPatience) {
  EarlyStopper s(2);
  EXPECT_TRUE(s.update(5.0));
  EXPECT_FALSE(s.update(5.0));
  EXPECT_FALSE(s.should_stop());
  EXPECT_FALSE(s.update(6.0));
  EXPECT_TRUE(s.should_stop());
  EXPECT_EQ(s.best(), 5.0);
  EXPECT_EQ(s.best_epoch(), 0u);
}

TEST(EarlyStopperTest, ImprovementResetsCounter) {
  EarlyStopper s(2);
  s.update(3.0);
  s.update(4.0);
  EXPECT_TRUE(s.update(2.0));
  s.update(2.5);
  EXPECT_FALSE(s.should_stop());
  EXPECT_EQ(s.best_epoch(), 2u);
}

TEST(TrainConfigTest, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.patience = 0;
  EXPECT_THROW(c.validate(), DataError);
  c = TrainConfig{};
  c.patience = c.epochs;
  EXPECT_THROW(c.validate(), DataError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), DataError);
  c = TrainConfig{};
  c.validation_fraction = 0.5;
  EXPECT_THROW(c.validate(), DataError);
  c = TrainConfig{};
  c.seed = 123;
  EXPECT_EQ(TrainConfig::from_json(c.to_json()).to_json(), c.to_json());
}

TEST(ModeTest, ParseAndLabels) {
  EXPECT_EQ(Mode::parse("mtl").kind, Mode::Kind::kMtl);
  EXPECT_EQ(Mode::parse("stl").kind, Mode::Kind::kStl);
  const Mode m = Mode::parse("single-view:E1");
  EXPECT_EQ(m.kind, Mode::Kind::kSingleView);
  EXPECT_EQ(m.view, kViewOrder[0]);
  EXPECT_EQ(m.str(), "single-view:E1");
  EXPECT_EQ(m.label(), "#E1");
  EXPECT_THROW(Mode::parse("single-view:X1"), DataError);
  EXPECT_THROW(Mode::parse("both"), DataError);
  EXPECT_FALSE(m.apply(ModelConfig{}).with_decoders);
  EXPECT_TRUE(Mode::parse("mtl").apply(ModelConfig{}).with_decoders);
}

TEST(TrainOne, DeterministicLossSequence) {
  const auto ex = toy_examples(6, 1);
  auto run = [&] {
    MtlModel m = build_model(small_config(), 3);
    TrainConfig tc;
    tc.epochs = 8;
    tc.patience = 7;
    tc.batch_size = 3;
    return train_one(m, refs_of(ex, 0, 9), refs_of(ex, 9, 12), tc, Mode{});
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.train_loss.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.train_loss[i]), std::bit_cast<std::uint64_t>(b.train_loss[i]));
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.validation_loss[i]), std::bit_cast<std::uint64_t>(b.validation_loss[i]));
  }
}

TEST(TrainOne, RestoresBestValidationParameters) {
  const auto ex = toy_examples(8, 2);
  MtlModel m = build_model(small_config(), 4);
  TrainConfig tc;
  tc.epochs = 40;
  tc.patience = 6;
  tc.batch_size = 4;
  tc.learning_rate = 3e-3;
  const auto val = refs_of(ex, 12, 16);
  const auto r = train_one(m, refs_of(ex, 0, 12), val, tc, Mode{});
  const double final_val = yield_loss(m, val, Mode{});
  EXPECT_EQ(final_val, r.best_validation_loss);
  EXPECT_EQ(r.validation_loss[r.best_epoch], r.best_validation_loss);
  for (std::size_t e = r.best_epoch; e < r.validation_loss.size(); ++e) EXPECT_LE(final_val, r.validation_loss[e]);
  if (r.epochs_trained < tc.epochs) {
    EXPECT_EQ(r.epochs_trained, r.best_epoch + 1 + tc.patience);
  }
}

TEST(TrainOne, TrainsFullBudgetWhileImproving) {
  const auto ex = toy_examples(4, 3);
  MtlModel m = build_model(small_config(), 5);
  TrainConfig tc;
  tc.epochs = 6;
  tc.patience = 5;
  tc.learning_rate = 1e-4;
  const auto r = train_one(m, refs_of(ex, 0, 6), refs_of(ex, 0, 6), tc, Mode::parse("stl"));
  bool improving = true;
  for (std::size_t i = 1; i < r.validation_loss.size(); ++i) improving &= r.validation_loss[i] < r.validation_loss[i - 1];
  if (improving) {
    EXPECT_EQ(r.epochs_trained, tc.epochs);
  }
  EXPECT_GE(r.epochs_trained, 1u);
}

TEST(TrainOne, LearnsToyTask) {
  const auto ex = toy_examples(8, 6);
  MtlModel m = build_model(small_config(), 6);
  TrainConfig tc;
  tc.epochs = 150;
  tc.patience = 149;
  tc.batch_size = 4;
  tc.learning_rate = 3e-3;
  const auto train = refs_of(ex, 0, 16);
  const double before = yield_loss(m, train, Mode{});
  train_one(m, train, train, tc, Mode{});
  EXPECT_LT(yield_loss(m, train, Mode{}), 0.1 * before);
}

TEST(TrainOne, DivergenceIsReported) {
  const auto ex = toy_examples(2, 7);
  MtlModel m = build_model(small_config(), 7);
  m.parameters().back().tensor.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 3;
  tc.patience = 2;
  EXPECT_THROW(train_one(m, refs_of(ex, 0, 2), refs_of(ex, 2, 4), tc, Mode{}), NumericError);
  EXPECT_THROW(train_one(m, {}, refs_of(ex, 2, 4), tc, Mode{}), DataError);
}

class CrossValidation : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    examples_ = new std::vector<PreparedExample>(toy_examples(12, 8));
    plan_ = new FoldPlan(make_folds(meta_of(*examples_), 3, 9));
  }
  static void TearDownTestSuite() {
    delete examples_;
    delete plan_;
  }
  static CvReport run(const Mode& mode) {
    TrainConfig tc;
    tc.epochs = 6;
    tc.patience = 3;
    tc.batch_size = 4;
    tc.seed = 11;
    const ModelConfig mc = mode.apply(small_config());
    return cross_validate(*examples_, [&](std::size_t f) { return build_model(mc, derive_seed(5, f)); }, *plan_,
                          tc, mode);
  }
  static std::vector<PreparedExample>* examples_;
  static FoldPlan* plan_;
};
std::vector<PreparedExample>* CrossValidation::examples_ = nullptr;
FoldPlan* CrossValidation::plan_ = nullptr;

TEST_F(CrossValidation, CoversEveryExampleOnce) {
  const CvReport r = run(Mode{});
  ASSERT_EQ(r.folds.size(), 3u);
  ASSERT_EQ(r.predictions.size(), examples_->size());
  std::size_t total = 0;
  for (const auto& f : r.folds) total += f.n_test;
  EXPECT_EQ(total, examples_->size());
  for (std::size_t i = 0; i < r.predictions.size(); ++i) {
    EXPECT_EQ(r.predictions[i].key, (*examples_)[i].key());
    EXPECT_EQ(r.predictions[i].fold, plan_->fold_of(meta_of(*examples_)[i]));
  }
  ASSERT_TRUE(r.reconstruction_mse.has_value());
}

TEST_F(CrossValidation, AggregateMaeIsExampleWeighted) {
  const CvReport r = run(Mode{});
  double weighted = 0.0;
  std::size_t n = 0;
  for (const auto& f : r.folds) {
    weighted += f.mae_g * static_cast<double>(f.n_test);
    n += f.n_test;
  }
  EXPECT_NEAR(r.aggregate_mae_g, weighted / static_cast<double>(n), 1e-9);
  std::vector<double> p, t;
  for (const auto& pr : r.predictions) {
    p.push_back(pr.predicted_g);
    t.push_back(pr.truth_g);
  }
  EXPECT_NEAR(r.aggregate_mae_g, mae(p, t), 1e-9);
  EXPECT_NEAR(r.ci95_mae_g, ci95(r.fold_maes()), 1e-12);
  EXPECT_NEAR(r.aggregate_mean_accuracy, mean_accuracy(r.aggregate_mae_g, r.mean_weight_g), 1e-12);
}

TEST_F(CrossValidation, BitwiseReproducible) {
  EXPECT_EQ(run(Mode{}).to_json().dump(), run(Mode{}).to_json().dump());
}

TEST_F(CrossValidation, JsonRoundTripAndPairing) {
  const CvReport mtl = run(Mode{});
  const CvReport back = CvReport::from_json(mtl.to_json());
  EXPECT_EQ(back.to_json().dump(), mtl.to_json().dump());
  const CvReport sv = run(Mode::parse("single-view:E1"));
  EXPECT_FALSE(sv.reconstruction_mse.has_value());
  const auto c = compare_reports(mtl, sv);
  EXPECT_EQ(c.other_mode, "single-view:E1");
  EXPECT_NEAR(c.confidence_this_better, paired_fold_comparison(mtl.fold_maes(), sv.fold_maes()), 1e-15);
  const auto rc = compare_reports(sv, mtl);
  EXPECT_NEAR(c.confidence_this_better + rc.confidence_this_better, 1.0, 1e-12);
  CvReport other = sv;
  other.plan = make_folds(meta_of(*examples_), 3, 10);
  EXPECT_THROW(compare_reports(mtl, other), DataError);
}

}  // namespace
}  // namespace vym
