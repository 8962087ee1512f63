#include "vym/ops.hpp"

#include <cmath>
#include <string>

#include "vym/error.hpp"
#include "vym/kernels.hpp"

namespace vym {

using detail::Node;

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": " + what + " is undefined");
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

}  // namespace

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  if (kernel == 0 || kernel > in + 2 * pad) {
    throw ShapeError("conv2d: kernel " + std::to_string(kernel) + " exceeds padded extent " +
                     std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

std::size_t transposed_out_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                std::size_t pad, std::size_t output_pad) {
  if (stride == 0) throw ShapeError("transposed_conv2d: stride must be positive");
  if (output_pad >= stride) {
    throw ShapeError("transposed_conv2d: output_pad " + std::to_string(output_pad) +
                     " must be smaller than stride " + std::to_string(stride));
  }
  const std::size_t full = (in - 1) * stride + kernel + output_pad;
  if (kernel == 0 || full <= 2 * pad) {
    throw ShapeError("transposed_conv2d: padding " + std::to_string(pad) +
                     " leaves no output");
  }
  return full - 2 * pad;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require_rank(input, 3, "conv2d", "input");
  require_rank(kernel, 4, "conv2d", "kernel");
  require_rank(bias, 1, "conv2d", "bias");
  const auto& ks = kernel.shape();
  if (ks[1] != input.dim(0)) {
    throw ShapeError("conv2d: kernel " + shape_str(ks) + " expects " + std::to_string(ks[1]) +
                     " input channels, input is " + shape_str(input.shape()));
  }
  if (ks[2] != ks[3]) throw ShapeError("conv2d: kernel must be square, got " + shape_str(ks));
  if (bias.dim(0) != ks[0]) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(ks[0]) + " output channels");
  }
  kernels::ConvGeometry g;
  g.image_channels = input.dim(0);
  g.image_h = input.dim(1);
  g.image_w = input.dim(2);
  g.grid_channels = ks[0];
  g.kernel = ks[2];
  g.stride = stride;
  g.pad = pad;
  g.grid_h = conv_out_size(g.image_h, g.kernel, stride, pad);
  g.grid_w = conv_out_size(g.image_w, g.kernel, stride, pad);

  std::vector<double> out(g.grid_size());
  kernels::conv_forward(g, input.data(), kernel.data(), bias.data(), out);

  return detail::make_result(
      {g.grid_channels, g.grid_h, g.grid_w}, std::move(out), {input, kernel, bias},
      [g](Node& self) {
        Node& in = *self.inputs[0];
        Node& k = *self.inputs[1];
        Node& b = *self.inputs[2];
        if (in.requires_grad) kernels::conv_backward_image_add(g, self.grad, k.data, in.ensure_grad());
        if (k.requires_grad) kernels::conv_backward_weight_add(g, in.data, self.grad, k.ensure_grad());
        if (b.requires_grad) kernels::channel_sum_add(self.grad, g.grid_channels, b.ensure_grad());
      });
}

Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                         std::size_t stride, std::size_t pad, std::size_t output_pad) {
  require_rank(input, 3, "transposed_conv2d", "input");
  require_rank(kernel, 4, "transposed_conv2d", "kernel");
  require_rank(bias, 1, "transposed_conv2d", "bias");
  const auto& ks = kernel.shape();
  if (ks[0] != input.dim(0)) {
    throw ShapeError("transposed_conv2d: kernel " + shape_str(ks) + " expects " +
                     std::to_string(ks[0]) + " input channels, input is " +
                     shape_str(input.shape()));
  }
  if (ks[2] != ks[3]) {
    throw ShapeError("transposed_conv2d: kernel must be square, got " + shape_str(ks));
  }
  if (bias.dim(0) != ks[1]) {
    throw ShapeError("transposed_conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(ks[1]) + " output channels");
  }
  kernels::ConvGeometry g;
  g.grid_channels = input.dim(0);
  g.grid_h = input.dim(1);
  g.grid_w = input.dim(2);
  g.image_channels = ks[1];
  g.kernel = ks[2];
  g.stride = stride;
  g.pad = pad;
  g.image_h = transposed_out_size(g.grid_h, g.kernel, stride, pad, output_pad);
  g.image_w = transposed_out_size(g.grid_w, g.kernel, stride, pad, output_pad);

  std::vector<double> out(g.image_size(), 0.0);
  kernels::conv_backward_image_add(g, input.data(), kernel.data(), out);
  const std::size_t plane = g.image_h * g.image_w;
  const auto bv = bias.data();
  for (std::size_t c = 0; c < g.image_channels; ++c) {
    for (std::size_t j = 0; j < plane; ++j) out[c * plane + j] += bv[c];
  }

  return detail::make_result(
      {g.image_channels, g.image_h, g.image_w}, std::move(out), {input, kernel, bias},
      [g](Node& self) {
        Node& in = *self.inputs[0];
        Node& k = *self.inputs[1];
        Node& b = *self.inputs[2];
        if (in.requires_grad) {
          std::vector<double> tmp(g.grid_size());
          kernels::conv_forward(g, self.grad, k.data, {}, tmp);
          auto& gi = in.ensure_grad();
          for (std::size_t i = 0; i < tmp.size(); ++i) gi[i] += tmp[i];
        }
        if (k.requires_grad) kernels::conv_backward_weight_add(g, self.grad, in.data, k.ensure_grad());
        if (b.requires_grad) kernels::channel_sum_add(self.grad, g.image_channels, b.ensure_grad());
      });
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 1, "dense", "input");
  require_rank(weight, 2, "dense", "weight");
  require_rank(bias, 1, "dense", "bias");
  const std::size_t m = weight.dim(0);
  const std::size_t n = weight.dim(1);
  if (input.dim(0) != n || bias.dim(0) != m) {
    throw ShapeError("dense: input " + shape_str(input.shape()) + ", weight " +
                     shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()) +
                     " do not agree");
  }
  const auto x = input.data();
  const auto w = weight.data();
  const auto b = bias.data();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = b[i];
    for (std::size_t j = 0; j < n; ++j) acc += w[i * n + j] * x[j];
    out[i] = acc;
  }
  return detail::make_result({m}, std::move(out), {input, weight, bias}, [m, n](Node& self) {
    Node& in = *self.inputs[0];
    Node& wt = *self.inputs[1];
    Node& bs = *self.inputs[2];
    const auto& go = self.grad;
    if (in.requires_grad) {
      auto& gi = in.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gi[j] += wt.data[i * n + j] * go[i];
      }
    }
    if (wt.requires_grad) {
      auto& gw = wt.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gw[i * n + j] += go[i] * in.data[j];
      }
    }
    if (bs.requires_grad) {
      auto& gb = bs.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) gb[i] += go[i];
    }
  });
}

Tensor relu(const Tensor& input) {
  const auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return detail::make_result(input.shape(), std::move(out), {input}, [](Node& self) {
    Node& in = *self.inputs[0];
    auto& gi = in.ensure_grad();
    for (std::size_t i = 0; i < gi.size(); ++i) {
      if (in.data[i] > 0.0) gi[i] += self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& input) {
  const auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Split by sign so exp never overflows.
    if (x[i] >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-x[i]));
    } else {
      const double e = std::exp(x[i]);
      out[i] = e / (1.0 + e);
    }
  }
  return detail::make_result(input.shape(), std::move(out), {input}, [](Node& self) {
    Node& in = *self.inputs[0];
    auto& gi = in.ensure_grad();
    for (std::size_t i = 0; i < gi.size(); ++i) {
      const double y = self.data[i];
      gi[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse_loss");
  const auto x = a.data();
  const auto y = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  const double n = static_cast<double>(x.size());
  return detail::make_result({1}, {acc / n}, {a, b}, [n](Node& self) {
    Node& l = *self.inputs[0];
    Node& r = *self.inputs[1];
    const double s = 2.0 * self.grad[0] / n;
    if (l.requires_grad) {
      auto& g = l.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * (l.data[i] - r.data[i]);
    }
    if (r.requires_grad) {
      auto& g = r.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= s * (l.data[i] - r.data[i]);
    }
  });
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  std::size_t channels = 0;
  for (const auto& p : parts) {
    require_rank(p, 3, "concat_channels", "part");
    if (p.dim(1) != parts[0].dim(1) || p.dim(2) != parts[0].dim(2)) {
      throw ShapeError("concat_channels: spatial mismatch " + shape_str(p.shape()) + " vs " +
                       shape_str(parts[0].shape()));
    }
    channels += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(channels * parts[0].dim(1) * parts[0].dim(2));
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return detail::make_result({channels, parts[0].dim(1), parts[0].dim(2)}, std::move(out),
                             std::move(inputs), [](Node& self) {
                               std::size_t offset = 0;
                               for (auto& in : self.inputs) {
                                 const std::size_t n = in->data.size();
                                 if (in->requires_grad) {
                                   auto& g = in->ensure_grad();
                                   for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
                                 }
                                 offset += n;
                               }
                             });
}

Tensor flatten(const Tensor& input) {
  const auto x = input.data();
  return detail::make_result({x.size()}, std::vector<double>(x.begin(), x.end()), {input},
                             [](Node& self) {
                               auto& g = self.inputs[0]->ensure_grad();
                               for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                             });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      auto& g = in->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = factor * x[i];
  return detail::make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& l = *self.inputs[0];
    Node& r = *self.inputs[1];
    if (l.requires_grad) {
      auto& g = l.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * r.data[i];
    }
    if (r.requires_grad) {
      auto& g = r.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * l.data[i];
    }
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return detail::make_result({1}, {acc}, {a}, [](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

}  // namespace vym
