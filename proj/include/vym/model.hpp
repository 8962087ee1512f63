#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vym/dataset.hpp"
#include "vym/optim.hpp"
#include "vym/tensor.hpp"

namespace vym {

/// Architecture and loss weighting of the four-view network.
struct ModelConfig {
  std::size_t input_side = 150;
  std::vector<std::size_t> encoder_widths = {16, 32, 64, 128};
  std::size_t kernel = 3;
  std::vector<std::size_t> strides = {2, 2, 2, 2};
  std::vector<std::size_t> decoder_output_pads = {0, 1, 0, 1};
  std::vector<std::size_t> head_widths = {256, 64};
  std::size_t fc_hidden = 128;
  double lambda_yield = 1.0;
  double lambda_recon = 0.25;  // per decoder
  double target_scale_g = 1000.0;
  bool share_encoder_weights = false;
  /// Build decoders at all. False for the single-task variant.
  bool with_decoders = true;
  /// Keep decoder parameters out of the trainable set.
  bool freeze_decoders = false;

  /// Default widths with strides/output pads derived so the decoder mirrors
  /// the encoder exactly for the given input side.
  static ModelConfig for_input_side(std::size_t side, std::vector<std::size_t> encoder_widths,
                                    std::vector<std::size_t> head_widths, std::size_t fc_hidden);
  /// Same architecture for another input side, output pads re-derived.
  ModelConfig with_input_side(std::size_t side) const;

  /// Spatial sizes: input, then after each encoder layer.
  std::vector<std::size_t> encoder_sizes() const;
  /// Sizes after each of the five decoder layers.
  std::vector<std::size_t> decoder_sizes() const;
  /// Throws ShapeError naming the first layer that breaks the shape plan.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j, ModelConfig base);
  static ModelConfig from_json(const nlohmann::json& j) { return from_json(j, ModelConfig{}); }
};

/// Single-task configuration: no reconstruction loss, no decoders.
ModelConfig stl_variant(ModelConfig config);

struct ForwardOutput {
  std::vector<Tensor> reconstructions;  // empty without decoders
  Tensor yield_scaled;                   // [1], in units of target_scale_g
};

class MtlModel {
 public:
  MtlModel(const ModelConfig& config, std::uint64_t seed);
  MtlModel(MtlModel&&) = default;
  MtlModel& operator=(MtlModel&&) = default;
  MtlModel(const MtlModel&) = delete;
  MtlModel& operator=(const MtlModel&) = delete;

  const ModelConfig& config() const noexcept { return config_; }

  ForwardOutput forward(std::span<const Tensor, 4> inputs) const;
  /// Yield path only; skips the decoders.
  Tensor forward_yield(std::span<const Tensor, 4> inputs) const;
  /// Four top-level feature maps merged along channels.
  Tensor merged_features(std::span<const Tensor, 4> inputs) const;

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  /// Parameters the optimizer should update.
  std::vector<Parameter> trainable_parameters() const;
  std::size_t parameter_count() const;

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  struct Conv {
    Tensor kernel, bias;
    std::size_t stride = 1, pad = 0;
  };
  struct Deconv {
    Tensor kernel, bias;
    std::size_t stride = 1, pad = 0, output_pad = 0;
  };
  struct Dense {
    Tensor weight, bias;
  };

  std::vector<Tensor> encode(std::size_t channel, const Tensor& input) const;
  Tensor decode(std::size_t channel, const Tensor& features) const;
  Tensor head(std::span<const Tensor> top_features) const;

  Tensor make_param(const std::string& name, Shape shape, std::size_t fan_in, std::uint64_t seed);

  ModelConfig config_;
  std::vector<std::vector<Conv>> encoders_;
  std::vector<std::vector<Deconv>> decoders_;
  std::vector<Conv> head_convs_;
  Dense fc_, out_;
  std::vector<Parameter> params_;
};

MtlModel build_model(const ModelConfig& config, std::uint64_t seed);

/// lambda_yield * (yield_scaled - weight/s)^2 + lambda_recon * sum_i mse(recon_i, input_i)
Tensor mtl_loss(const ForwardOutput& output, std::span<const Tensor, 4> inputs, double weight_g,
                const ModelConfig& config);

/// The chosen view's tensor in all four channels.
std::array<Tensor, 4> single_view_inputs(std::span<const Tensor, 4> views, View view);

/// max(0, yield_scaled) * s, in grams.
double predict_yield(const MtlModel& model, std::span<const Tensor, 4> inputs);
double scaled_to_grams(double yield_scaled, double target_scale_g);

}  // namespace vym
