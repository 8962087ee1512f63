#include "vym/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <string>

#include "vym/error.hpp"

namespace vym {

namespace {

[[noreturn]] void bad(const std::string& msg) {
  throw DataError(DataError::Kind::kInvalidArgument, msg);
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_stddev(std::span<const double> v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double mae(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) {
    bad("mae: " + std::to_string(predictions.size()) + " predictions vs " +
        std::to_string(truths.size()) + " truths");
  }
  if (predictions.empty()) bad("mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += std::abs(predictions[i] - truths[i]);
  return s / static_cast<double>(predictions.size());
}

double mean_accuracy(double mae_g, double mean_weight_g) {
  if (!(mean_weight_g > 0.0)) bad("mean_accuracy: mean weight must be positive");
  return std::max(0.0, 1.0 - mae_g / mean_weight_g);
}

double per_pixel_mse(std::span<const Tensor> reconstructions, std::span<const Tensor> targets) {
  if (reconstructions.size() != targets.size() || reconstructions.empty()) {
    throw ShapeError("per_pixel_mse: need equally many non-zero reconstructions and targets");
  }
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (reconstructions[i].shape() != targets[i].shape()) {
      throw ShapeError("per_pixel_mse: shape mismatch " + shape_str(reconstructions[i].shape()) +
                       " vs " + shape_str(targets[i].shape()));
    }
    const auto a = reconstructions[i].data();
    const auto b = targets[i].data();
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    n += a.size();
  }
  return s / static_cast<double>(n);
}

double student_t_quantile(double p, double dof) {
  return boost::math::quantile(boost::math::students_t(dof), p);
}

double student_t_cdf(double t, double dof) {
  return boost::math::cdf(boost::math::students_t(dof), t);
}

double ci95(std::span<const double> values) {
  if (values.size() < 2) bad("ci95: need at least 2 values");
  const double k = static_cast<double>(values.size());
  return student_t_quantile(0.975, k - 1.0) * sample_stddev(values) / std::sqrt(k);
}

double paired_fold_comparison(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) bad("paired_fold_comparison: fold counts differ");
  if (a.size() < 2) bad("paired_fold_comparison: need at least 2 folds");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
  const double m = mean_of(d);
  const double sd = sample_stddev(d);
  if (sd == 0.0) return m > 0.0 ? 1.0 : (m < 0.0 ? 0.0 : 0.5);
  const double k = static_cast<double>(d.size());
  return student_t_cdf(m / (sd / std::sqrt(k)), k - 1.0);
}

double traditional_estimate(double cluster_weight_g, double clusters_per_vine, double n_vines) {
  if (cluster_weight_g < 0.0 || clusters_per_vine < 0.0 || n_vines < 0.0) {
    bad("traditional_estimate: inputs must be non-negative");
  }
  return cluster_weight_g * clusters_per_vine * n_vines;
}

}  // namespace vym
