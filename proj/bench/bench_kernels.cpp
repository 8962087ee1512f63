// Reference vs parallel convolution kernels, plus one full training step of
// the default and a desk-scale network.

#include <benchmark/benchmark.h>

#include <vector>

#include "vym/kernels.hpp"
#include "vym/model.hpp"
#include "vym/ops.hpp"
#include "vym/random.hpp"

namespace {

using vym::kernels::Backend;
using vym::kernels::ConvGeometry;

// Layers of the default 150x150 network: {cin, in_side, cout, stride}.
ConvGeometry layer(int which) {
  struct L {
    std::size_t cin, side, cout, stride;
  };
  static const L table[] = {{3, 150, 16, 2}, {16, 75, 32, 2}, {64, 19, 128, 2}, {512, 10, 256, 2}};
  const auto& l = table[which];
  ConvGeometry g;
  g.image_channels = l.cin;
  g.image_h = g.image_w = l.side;
  g.grid_channels = l.cout;
  g.kernel = 3;
  g.stride = l.stride;
  g.pad = 1;
  g.grid_h = g.grid_w = vym::conv_out_size(l.side, 3, l.stride, 1);
  return g;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  vym::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <Backend B>
void BM_ConvForward(benchmark::State& state) {
  const auto g = layer(static_cast<int>(state.range(0)));
  const auto image = random_vec(g.image_size(), 1);
  const auto weight = random_vec(g.weight_size(), 2);
  const auto bias = random_vec(g.grid_channels, 3);
  std::vector<double> grid(g.grid_size());
  for (auto _ : state) {
    if constexpr (B == Backend::kReference) {
      vym::kernels::reference::conv_forward(g, image, weight, bias, grid);
    } else {
      vym::kernels::parallel::conv_forward(g, image, weight, bias, grid);
    }
    benchmark::DoNotOptimize(grid.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.grid_size() * g.image_channels * 9));
}

template <Backend B>
void BM_ConvBackward(benchmark::State& state) {
  const auto g = layer(static_cast<int>(state.range(0)));
  const auto image = random_vec(g.image_size(), 1);
  const auto weight = random_vec(g.weight_size(), 2);
  const auto grid = random_vec(g.grid_size(), 3);
  std::vector<double> gi(g.image_size()), gw(g.weight_size());
  for (auto _ : state) {
    if constexpr (B == Backend::kReference) {
      vym::kernels::reference::conv_backward_image_add(g, grid, weight, gi);
      vym::kernels::reference::conv_backward_weight_add(g, image, grid, gw);
    } else {
      vym::kernels::parallel::conv_backward_image_add(g, grid, weight, gi);
      vym::kernels::parallel::conv_backward_weight_add(g, image, grid, gw);
    }
    benchmark::DoNotOptimize(gi.data());
    benchmark::DoNotOptimize(gw.data());
  }
}

void train_step(benchmark::State& state, const vym::ModelConfig& cfg, Backend backend) {
  vym::kernels::set_backend(backend);
  auto model = vym::build_model(cfg, 1);
  std::array<vym::Tensor, 4> inputs;
  for (std::size_t i = 0; i < 4; ++i) {
    auto v = random_vec(3 * cfg.input_side * cfg.input_side, 10 + i);
    for (auto& x : v) x = 0.5 + 0.5 * x;
    inputs[i] = vym::Tensor::from({3, cfg.input_side, cfg.input_side}, v);
  }
  for (auto _ : state) {
    vym::zero_grads(model.parameters());
    const auto out = model.forward(inputs);
    vym::backward(vym::mtl_loss(out, inputs, 1200.0, cfg));
  }
  vym::kernels::set_backend(Backend::kParallel);
}

void BM_TrainStepDefault(benchmark::State& state) {
  train_step(state, vym::ModelConfig{}, state.range(0) ? Backend::kParallel : Backend::kReference);
}

void BM_TrainStepDesk(benchmark::State& state) {
  const auto cfg = vym::ModelConfig::for_input_side(48, {8, 16, 16, 32}, {32, 16}, 32);
  train_step(state, cfg, state.range(0) ? Backend::kParallel : Backend::kReference);
}

}  // namespace

BENCHMARK(BM_ConvForward<Backend::kReference>)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<Backend::kParallel>)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<Backend::kReference>)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<Backend::kParallel>)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStepDefault)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond)->Iterations(3);
BENCHMARK(BM_TrainStepDesk)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
