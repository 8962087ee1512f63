#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vym/dataset.hpp"

namespace vym::testing {

// Examples for plants 1..n_plants, both cordons each; no files behind them.
inline std::vector<CordonExample> plant_examples(int n_plants) {
  std::vector<CordonExample> out;
  for (int p = 1; p <= n_plants; ++p) {
    for (Cordon c : {Cordon::kNorth, Cordon::kSouth}) {
      CordonExample e;
      e.plant = p;
      e.cordon = c;
      e.weight_g = 1000.0 + p;
      out.push_back(e);
    }
  }
  return out;
}

// Empty string when the plan partitions the examples, keeps both cordons of
// every plant together and balances plants over folds; else a diagnostic.
inline std::string fold_invariant_violation(const FoldPlan& plan, const std::vector<CordonExample>& examples) {
  std::vector<std::size_t> seen(examples.size(), 0);
  for (std::size_t f = 0; f < plan.k; ++f) {
    for (auto i : plan.test_indices(examples, f)) ++seen[i];
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (seen[i] != 1) return "example " + examples[i].key() + " appears in " + std::to_string(seen[i]) + " folds";
  }
  std::map<int, std::set<std::size_t>> folds_by_plant;
  for (const auto& e : examples) folds_by_plant[e.plant].insert(plan.fold_of(e));
  std::vector<std::size_t> plants_per_fold(plan.k, 0);
  for (const auto& [plant, folds] : folds_by_plant) {
    if (folds.size() != 1) return "plant " + std::to_string(plant) + " split across folds";
    ++plants_per_fold[*folds.begin()];
  }
  const auto [lo, hi] = std::minmax_element(plants_per_fold.begin(), plants_per_fold.end());
  if (*hi - *lo > 1) return "plant counts per fold differ by more than one";
  for (std::size_t f = 0; f < plan.k; ++f) {
    const auto train = plan.train_indices(examples, f);
    const auto test = plan.test_indices(examples, f);
    if (train.size() + test.size() != examples.size()) return "train/test do not cover fold " + std::to_string(f);
    for (auto i : train) {
      if (plan.fold_of(examples[i]) == f) return "test example in training set";
    }
  }
  return {};
}

}  // namespace vym::testing
