#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vym/tensor.hpp"

namespace vym {

/// A named, trainable tensor. The tensor handle is shared with the layer
/// that owns it.
struct Parameter {
  std::string name;
  Tensor tensor;
};

void zero_grads(std::span<Parameter> params);

/// Adam with bias correction.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  explicit AdamState(double lr = 1e-3) : learning_rate(lr) {}
};

/// Applies one Adam update in place. Every parameter must hold a gradient;
/// gradients are left untouched. Moment buffers are sized on first use and
/// must keep matching the parameter shapes afterwards.
void optimizer_step(std::span<Parameter> params, AdamState& state);

}  // namespace vym
