#include "vym/optim.hpp"

#include <cmath>

#include "vym/error.hpp"

namespace vym {

void zero_grads(std::span<Parameter> params) {
  for (auto& p : params) p.tensor.zero_grad();
}

void optimizer_step(std::span<Parameter> params, AdamState& state) {
  if (!(state.learning_rate > 0.0)) throw Error("optimizer_step: learning rate must be positive");
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) throw Error("optimizer_step: parameter '" + p.name + "' has no gradient");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.tensor.numel(), 0.0);
      state.second_moment.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("optimizer_step: state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto w = params[i].tensor.mutable_data();
    const auto g = params[i].tensor.grad();
    if (m.size() != w.size()) {
      throw ShapeError("optimizer_step: moment buffer size mismatch for '" + params[i].name + "'");
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace vym
