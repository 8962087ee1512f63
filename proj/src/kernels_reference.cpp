// Direct-loop convolution kernels. Serial and unoptimized; the parallel
// backend is tested against these.

#include "vym/kernels.hpp"

namespace vym::kernels::reference {

namespace {

// Image coordinate touched by grid position `o` and kernel tap `t`, or -1.
inline long tap(std::size_t o, std::size_t t, std::size_t stride, std::size_t pad,
                std::size_t extent) {
  const long v = static_cast<long>(o * stride + t) - static_cast<long>(pad);
  return (v >= 0 && v < static_cast<long>(extent)) ? v : -1;
}

}  // namespace

void conv_forward(const ConvGeometry& g, std::span<const double> image,
                  std::span<const double> weight, std::span<const double> bias,
                  std::span<double> grid) {
  const std::size_t k = g.kernel;
  for (std::size_t co = 0; co < g.grid_channels; ++co) {
    for (std::size_t oy = 0; oy < g.grid_h; ++oy) {
      for (std::size_t ox = 0; ox < g.grid_w; ++ox) {
        double acc = bias.empty() ? 0.0 : bias[co];
        for (std::size_t ci = 0; ci < g.image_channels; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long iy = tap(oy, ky, g.stride, g.pad, g.image_h);
            if (iy < 0) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long ix = tap(ox, kx, g.stride, g.pad, g.image_w);
              if (ix < 0) continue;
              acc += weight[((co * g.image_channels + ci) * k + ky) * k + kx] *
                     image[(ci * g.image_h + static_cast<std::size_t>(iy)) * g.image_w +
                           static_cast<std::size_t>(ix)];
            }
          }
        }
        grid[(co * g.grid_h + oy) * g.grid_w + ox] = acc;
      }
    }
  }
}

void conv_backward_image_add(const ConvGeometry& g, std::span<const double> grid,
                             std::span<const double> weight, std::span<double> image) {
  const std::size_t k = g.kernel;
  for (std::size_t co = 0; co < g.grid_channels; ++co) {
    for (std::size_t oy = 0; oy < g.grid_h; ++oy) {
      for (std::size_t ox = 0; ox < g.grid_w; ++ox) {
        const double go = grid[(co * g.grid_h + oy) * g.grid_w + ox];
        for (std::size_t ci = 0; ci < g.image_channels; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long iy = tap(oy, ky, g.stride, g.pad, g.image_h);
            if (iy < 0) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long ix = tap(ox, kx, g.stride, g.pad, g.image_w);
              if (ix < 0) continue;
              image[(ci * g.image_h + static_cast<std::size_t>(iy)) * g.image_w +
                    static_cast<std::size_t>(ix)] +=
                  weight[((co * g.image_channels + ci) * k + ky) * k + kx] * go;
            }
          }
        }
      }
    }
  }
}

void conv_backward_weight_add(const ConvGeometry& g, std::span<const double> image,
                              std::span<const double> grid, std::span<double> weight_grad) {
  const std::size_t k = g.kernel;
  for (std::size_t co = 0; co < g.grid_channels; ++co) {
    for (std::size_t ci = 0; ci < g.image_channels; ++ci) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (std::size_t oy = 0; oy < g.grid_h; ++oy) {
            const long iy = tap(oy, ky, g.stride, g.pad, g.image_h);
            if (iy < 0) continue;
            for (std::size_t ox = 0; ox < g.grid_w; ++ox) {
              const long ix = tap(ox, kx, g.stride, g.pad, g.image_w);
              if (ix < 0) continue;
              acc += grid[(co * g.grid_h + oy) * g.grid_w + ox] *
                     image[(ci * g.image_h + static_cast<std::size_t>(iy)) * g.image_w +
                           static_cast<std::size_t>(ix)];
            }
          }
          weight_grad[((co * g.image_channels + ci) * k + ky) * k + kx] += acc;
        }
      }
    }
  }
}

}  // namespace vym::kernels::reference
