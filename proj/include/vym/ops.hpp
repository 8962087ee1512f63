#pragma once

#include <cstddef>
#include <span>

#include "vym/tensor.hpp"

namespace vym {

/// Output extent of a convolution: floor((in + 2*pad - kernel) / stride) + 1.
std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

/// Output extent of a transposed convolution:
/// (in - 1) * stride - 2*pad + kernel + output_pad.
std::size_t transposed_out_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                std::size_t pad, std::size_t output_pad);

/// input [C_in,H,W], kernel [C_out,C_in,k,k], bias [C_out] -> [C_out,H',W'].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t pad);

/// input [C_in,H,W], kernel [C_in,C_out,k,k], bias [C_out] -> [C_out,H',W'].
/// This is the adjoint of conv2d with the same kernel layout; output_pad
/// (< stride) adds rows/columns on the bottom/right.
Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                         std::size_t stride, std::size_t pad, std::size_t output_pad);

/// input [n], weight [m,n], bias [m] -> [m].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);

/// Mean of squared differences; scalar [1]. Both sides may carry gradients.
Tensor mse_loss(const Tensor& a, const Tensor& b);

/// Concatenate [C_i,H,W] tensors along the channel axis.
Tensor concat_channels(std::span<const Tensor> parts);

/// Same data viewed as [numel].
Tensor flatten(const Tensor& input);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor mul(const Tensor& a, const Tensor& b);
/// Sum of all elements; scalar [1].
Tensor sum(const Tensor& a);

}  // namespace vym
