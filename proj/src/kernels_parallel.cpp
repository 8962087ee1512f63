// im2col-lowered convolution kernels. The lowering runs OpenMP-parallel over
// independent rows; the products go to single-threaded OpenBLAS dgemm, whose
// summation order is fixed, so results do not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <vector>

#include <cblas.h>

#include "vym/kernels.hpp"

namespace vym::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelThreshold = 1 << 15;

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc) {
  static const bool single_threaded = (openblas_set_num_threads(1), true);
  (void)single_threaded;
  cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n), static_cast<int>(k),
              1.0, a, static_cast<int>(lda), b, static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

// col[(ci*k + ky)*k + kx][oy*grid_w + ox], zero where the tap falls in padding.
void im2col(const ConvGeometry& g, std::span<const double> image, std::vector<double>& col) {
  const std::size_t k = g.kernel;
  const std::size_t rows = g.image_channels * k * k;
  const std::size_t cols = g.grid_h * g.grid_w;
  col.assign(rows * cols, 0.0);
  const long pad = static_cast<long>(g.pad);
#pragma omp parallel for schedule(static) if (rows * cols > kParallelThreshold)
  for (long r = 0; r < static_cast<long>(rows); ++r) {
    const std::size_t ci = static_cast<std::size_t>(r) / (k * k);
    const std::size_t ky = (static_cast<std::size_t>(r) / k) % k;
    const std::size_t kx = static_cast<std::size_t>(r) % k;
    double* dst = col.data() + static_cast<std::size_t>(r) * cols;
    const double* plane = image.data() + ci * g.image_h * g.image_w;
    for (std::size_t oy = 0; oy < g.grid_h; ++oy) {
      const long iy = static_cast<long>(oy * g.stride + ky) - pad;
      if (iy < 0 || iy >= static_cast<long>(g.image_h)) continue;
      const double* row = plane + static_cast<std::size_t>(iy) * g.image_w;
      double* out = dst + oy * g.grid_w;
      for (std::size_t ox = 0; ox < g.grid_w; ++ox) {
        const long ix = static_cast<long>(ox * g.stride + kx) - pad;
        if (ix >= 0 && ix < static_cast<long>(g.image_w)) out[ox] = row[ix];
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const std::vector<double>& col, std::span<double> image) {
  const std::size_t k = g.kernel;
  const std::size_t cols = g.grid_h * g.grid_w;
  const long pad = static_cast<long>(g.pad);
  // One thread per image channel: rows of different channels never alias.
#pragma omp parallel for schedule(static) if (col.size() > kParallelThreshold)
  for (long ci = 0; ci < static_cast<long>(g.image_channels); ++ci) {
    double* plane = image.data() + static_cast<std::size_t>(ci) * g.image_h * g.image_w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = col.data() + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
        for (std::size_t oy = 0; oy < g.grid_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(g.image_h)) continue;
          double* row = plane + static_cast<std::size_t>(iy) * g.image_w;
          const double* in = src + oy * g.grid_w;
          for (std::size_t ox = 0; ox < g.grid_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - pad;
            if (ix >= 0 && ix < static_cast<long>(g.image_w)) row[ix] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

namespace parallel {

void conv_forward(const ConvGeometry& g, std::span<const double> image,
                  std::span<const double> weight, std::span<const double> bias,
                  std::span<double> grid) {
  std::vector<double> col;
  im2col(g, image, col);
  const std::size_t rows = g.image_channels * g.kernel * g.kernel;
  const std::size_t cols = g.grid_h * g.grid_w;
  for (std::size_t co = 0; co < g.grid_channels; ++co) {
    std::fill(grid.begin() + static_cast<long>(co * cols), grid.begin() + static_cast<long>((co + 1) * cols),
              bias.empty() ? 0.0 : bias[co]);
  }
  gemm(CblasNoTrans, CblasNoTrans, g.grid_channels, cols, rows, weight.data(), rows, col.data(), cols,
       1.0, grid.data(), cols);
}

void conv_backward_image_add(const ConvGeometry& g, std::span<const double> grid,
                             std::span<const double> weight, std::span<double> image) {
  const std::size_t rows = g.image_channels * g.kernel * g.kernel;
  const std::size_t cols = g.grid_h * g.grid_w;
  std::vector<double> col(rows * cols, 0.0);
  gemm(CblasTrans, CblasNoTrans, rows, cols, g.grid_channels, weight.data(), rows, grid.data(), cols,
       0.0, col.data(), cols);
  col2im_add(g, col, image);
}

void conv_backward_weight_add(const ConvGeometry& g, std::span<const double> image,
                              std::span<const double> grid, std::span<double> weight_grad) {
  std::vector<double> col;
  im2col(g, image, col);
  const std::size_t rows = g.image_channels * g.kernel * g.kernel;
  const std::size_t cols = g.grid_h * g.grid_w;
  gemm(CblasNoTrans, CblasTrans, g.grid_channels, rows, cols, grid.data(), cols, col.data(), cols,
       1.0, weight_grad.data(), rows);
}

}  // namespace parallel

namespace {
std::atomic<Backend> g_backend{Backend::kParallel};
}  // namespace

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }
Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void conv_forward(const ConvGeometry& g, std::span<const double> image,
                  std::span<const double> weight, std::span<const double> bias,
                  std::span<double> grid) {
  if (backend() == Backend::kReference) {
    reference::conv_forward(g, image, weight, bias, grid);
  } else {
    parallel::conv_forward(g, image, weight, bias, grid);
  }
}

void conv_backward_image_add(const ConvGeometry& g, std::span<const double> grid,
                             std::span<const double> weight, std::span<double> image) {
  if (backend() == Backend::kReference) {
    reference::conv_backward_image_add(g, grid, weight, image);
  } else {
    parallel::conv_backward_image_add(g, grid, weight, image);
  }
}

void conv_backward_weight_add(const ConvGeometry& g, std::span<const double> image,
                              std::span<const double> grid, std::span<double> weight_grad) {
  if (backend() == Backend::kReference) {
    reference::conv_backward_weight_add(g, image, grid, weight_grad);
  } else {
    parallel::conv_backward_weight_add(g, image, grid, weight_grad);
  }
}

void channel_sum_add(std::span<const double> values, std::size_t channels,
                     std::span<double> out) {
  const std::size_t plane = values.size() / channels;
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t j = 0; j < plane; ++j) acc += values[c * plane + j];
    out[c] += acc;
  }
}

}  // namespace vym::kernels
