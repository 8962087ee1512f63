#pragma once

#include <cstddef>
#include <span>

namespace vym::kernels {

/// Geometry of a 2-D cross-correlation between an "image" side
/// [image_channels, image_h, image_w] and a "grid" side
/// [grid_channels, grid_h, grid_w], with weights laid out
/// [grid_channels, image_channels, kernel, kernel].
///
/// A forward convolution reads the image and writes the grid; a transposed
/// convolution reads the grid and writes the image. Zero padding.
struct ConvGeometry {
  std::size_t image_channels = 0;
  std::size_t image_h = 0;
  std::size_t image_w = 0;
  std::size_t grid_channels = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t image_size() const { return image_channels * image_h * image_w; }
  std::size_t grid_size() const { return grid_channels * grid_h * grid_w; }
  std::size_t weight_size() const { return grid_channels * image_channels * kernel * kernel; }
};

// Both backends implement the same contract. Functions named *_add
// accumulate into their output; the others overwrite it.

namespace reference {

/// grid = W * image + bias (bias may be empty).
void conv_forward(const ConvGeometry& g, std::span<const double> image,
                  std::span<const double> weight, std::span<const double> bias,
                  std::span<double> grid);
/// image += W^T * grid
void conv_backward_image_add(const ConvGeometry& g, std::span<const double> grid,
                             std::span<const double> weight, std::span<double> image);
/// weight_grad += grid (x) image
void conv_backward_weight_add(const ConvGeometry& g, std::span<const double> image,
                              std::span<const double> grid, std::span<double> weight_grad);

}  // namespace reference

namespace parallel {

void conv_forward(const ConvGeometry& g, std::span<const double> image,
                  std::span<const double> weight, std::span<const double> bias,
                  std::span<double> grid);
void conv_backward_image_add(const ConvGeometry& g, std::span<const double> grid,
                             std::span<const double> weight, std::span<double> image);
void conv_backward_weight_add(const ConvGeometry& g, std::span<const double> image,
                              std::span<const double> grid, std::span<double> weight_grad);

}  // namespace parallel

enum class Backend { kReference, kParallel };

/// Backend used by the tensor ops. Process-wide; defaults to kParallel.
void set_backend(Backend b);
Backend backend();

void conv_forward(const ConvGeometry& g, std::span<const double> image,
                  std::span<const double> weight, std::span<const double> bias,
                  std::span<double> grid);
void conv_backward_image_add(const ConvGeometry& g, std::span<const double> grid,
                             std::span<const double> weight, std::span<double> image);
void conv_backward_weight_add(const ConvGeometry& g, std::span<const double> image,
                              std::span<const double> grid, std::span<double> weight_grad);

/// out[c] += sum over plane c of values [channels, plane].
void channel_sum_add(std::span<const double> values, std::size_t channels,
                     std::span<double> out);

}  // namespace vym::kernels
