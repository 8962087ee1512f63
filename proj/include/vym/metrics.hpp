#pragma once

#include <span>

#include "vym/tensor.hpp"

namespace vym {

/// Mean absolute error, grams.
double mae(std::span<const double> predictions, std::span<const double> truths);

/// 1 - mae / mean_weight, clamped below at 0.
double mean_accuracy(double mae_g, double mean_weight_g);

/// Mean squared difference over every element of every tensor pair.
double per_pixel_mse(std::span<const Tensor> reconstructions, std::span<const Tensor> targets);

/// Two-sided 95% Student-t half-width of the mean of `values`.
double ci95(std::span<const double> values);

/// Upper quantile t_{p, dof}.
double student_t_quantile(double p, double dof);
double student_t_cdf(double t, double dof);

/// One-sided paired t-test on per-fold values: confidence (1 - p) that
/// mean(a) < mean(b). Zero-variance differences give exactly 1, 0.5 or 0.
double paired_fold_comparison(std::span<const double> a, std::span<const double> b);

/// Traditional block estimate: cluster weight x clusters per vine x vines.
double traditional_estimate(double cluster_weight_g, double clusters_per_vine, double n_vines);

}  // namespace vym
