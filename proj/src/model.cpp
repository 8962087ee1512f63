#include "vym/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vym/error.hpp"
#include "vym/ops.hpp"
#include "vym/random.hpp"

namespace vym {

namespace {

std::size_t same_pad(std::size_t kernel) { return kernel / 2; }

std::string layer_name(const char* group, std::size_t index, const char* layer, std::size_t li) {
  return std::string(group) + std::to_string(index) + "." + layer + std::to_string(li);
}

}  // namespace

std::vector<std::size_t> ModelConfig::encoder_sizes() const {
  std::vector<std::size_t> sizes = {input_side};
  for (std::size_t i = 0; i < strides.size(); ++i) {
    sizes.push_back(conv_out_size(sizes.back(), kernel, strides[i], same_pad(kernel)));
  }
  return sizes;
}

std::vector<std::size_t> ModelConfig::decoder_sizes() const {
  const auto enc = encoder_sizes();
  std::vector<std::size_t> sizes;
  std::size_t cur = enc.back();
  for (std::size_t i = 0; i < decoder_output_pads.size(); ++i) {
    const std::size_t stride = strides[strides.size() - 1 - i];
    cur = transposed_out_size(cur, kernel, stride, same_pad(kernel), decoder_output_pads[i]);
    sizes.push_back(cur);
  }
  sizes.push_back(transposed_out_size(cur, kernel, 1, same_pad(kernel), 0));
  return sizes;
}

void ModelConfig::validate() const {
  if (encoder_widths.size() != 4 || strides.size() != 4) {
    throw ShapeError("model: encoder must have exactly 4 layers");
  }
  if (decoder_output_pads.size() != 4) {
    throw ShapeError("model: decoder needs 4 output pads (4 upsampling layers + 1 output layer)");
  }
  if (head_widths.size() != 2) throw ShapeError("model: yield head must have exactly 2 conv layers");
  if (kernel == 0 || kernel % 2 == 0) throw ShapeError("model: kernel size must be odd");
  const auto any_zero = [](const std::vector<std::size_t>& v) {
    return std::any_of(v.begin(), v.end(), [](std::size_t x) { return x == 0; });
  };
  if (any_zero(encoder_widths) || any_zero(head_widths) || any_zero(strides) || fc_hidden == 0) {
    throw ShapeError("model: widths and strides must be positive");
  }
  if (!(target_scale_g > 0.0) || lambda_yield < 0.0 || lambda_recon < 0.0) {
    throw ShapeError("model: target scale must be positive and loss weights non-negative");
  }
  const auto enc = encoder_sizes();
  if (!with_decoders) return;
  std::size_t cur = enc.back();
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t stride = strides[3 - i];
    const std::size_t want = enc[3 - i];
    std::size_t got = 0;
    try {
      got = transposed_out_size(cur, kernel, stride, same_pad(kernel), decoder_output_pads[i]);
    } catch (const ShapeError& e) {
      throw ShapeError("model: decoder layer deconv" + std::to_string(i) + ": " + e.what());
    }
    if (got != want) {
      throw ShapeError("model: decoder layer deconv" + std::to_string(i) + " produces " +
                       std::to_string(got) + "x" + std::to_string(got) + ", expected " +
                       std::to_string(want) + "x" + std::to_string(want) +
                       " (adjust decoder_output_pads)");
    }
    cur = got;
  }
}

ModelConfig ModelConfig::for_input_side(std::size_t side, std::vector<std::size_t> encoder_widths,
                                        std::vector<std::size_t> head_widths, std::size_t fc_hidden) {
  ModelConfig c;
  c.encoder_widths = std::move(encoder_widths);
  c.head_widths = std::move(head_widths);
  c.fc_hidden = fc_hidden;
  return c.with_input_side(side);
}

ModelConfig ModelConfig::with_input_side(std::size_t side) const {
  ModelConfig c = *this;
  c.input_side = side;
  if (c.strides.size() != 4) throw ShapeError("model: expected 4 encoder strides");
  c.decoder_output_pads.assign(4, 0);
  const auto enc = c.encoder_sizes();
  std::size_t cur = enc.back();
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t base = transposed_out_size(cur, c.kernel, c.strides[3 - i], same_pad(c.kernel), 0);
    const std::size_t want = enc[3 - i];
    if (want < base || want - base >= c.strides[3 - i]) {
      throw ShapeError("model: no output pad lets deconv" + std::to_string(i) + " reach " +
                       std::to_string(want));
    }
    c.decoder_output_pads[i] = want - base;
    cur = want;
  }
  c.validate();
  return c;
}

nlohmann::json ModelConfig::to_json() const {
  return {{"input_side", input_side},
          {"encoder_widths", encoder_widths},
          {"kernel", kernel},
          {"strides", strides},
          {"decoder_output_pads", decoder_output_pads},
          {"head_widths", head_widths},
          {"fc_hidden", fc_hidden},
          {"lambda_yield", lambda_yield},
          {"lambda_recon", lambda_recon},
          {"target_scale_g", target_scale_g},
          {"share_encoder_weights", share_encoder_weights},
          {"with_decoders", with_decoders},
          {"freeze_decoders", freeze_decoders}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j, ModelConfig c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("input_side", c.input_side);
  get("encoder_widths", c.encoder_widths);
  get("kernel", c.kernel);
  get("strides", c.strides);
  get("decoder_output_pads", c.decoder_output_pads);
  get("head_widths", c.head_widths);
  get("fc_hidden", c.fc_hidden);
  get("lambda_yield", c.lambda_yield);
  get("lambda_recon", c.lambda_recon);
  get("target_scale_g", c.target_scale_g);
  get("share_encoder_weights", c.share_encoder_weights);
  get("with_decoders", c.with_decoders);
  get("freeze_decoders", c.freeze_decoders);
  return c;
}

ModelConfig stl_variant(ModelConfig config) {
  config.lambda_recon = 0.0;
  config.with_decoders = false;
  config.freeze_decoders = false;
  return config;
}

Tensor MtlModel::make_param(const std::string& name, Shape shape, std::size_t fan_in,
                            std::uint64_t seed) {
  const std::size_t n = shape_numel(shape);
  std::vector<double> values(n, 0.0);
  const bool is_bias = shape.size() == 1;
  if (!is_bias) {
    // He-uniform for ReLU layers.
    const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    Rng rng(derive_seed(seed, hash_name(name)));
    for (auto& v : values) v = rng.uniform(-bound, bound);
  }
  Tensor t = Tensor::from(std::move(shape), std::move(values), true);
  params_.push_back({name, t});
  return t;
}

MtlModel::MtlModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t k = config_.kernel;
  const std::size_t pad = same_pad(k);
  const auto& w = config_.encoder_widths;

  const std::size_t n_encoders = config_.share_encoder_weights ? 1 : 4;
  for (std::size_t e = 0; e < n_encoders; ++e) {
    std::vector<Conv> layers;
    std::size_t cin = 3;
    for (std::size_t l = 0; l < 4; ++l) {
      const auto base = config_.share_encoder_weights ? std::string("encoder.conv") + std::to_string(l)
                                                      : layer_name("encoder", e, "conv", l);
      Conv c;
      c.kernel = make_param(base + ".kernel", {w[l], cin, k, k}, cin * k * k, seed);
      c.bias = make_param(base + ".bias", {w[l]}, 0, seed);
      c.stride = config_.strides[l];
      c.pad = pad;
      layers.push_back(c);
      cin = w[l];
    }
    encoders_.push_back(std::move(layers));
  }
  while (encoders_.size() < 4) encoders_.push_back(encoders_.front());

  const auto enc_sizes = config_.encoder_sizes();
  std::size_t cin = 4 * w[3];
  std::size_t side = enc_sizes.back();
  for (std::size_t l = 0; l < 2; ++l) {
    const auto base = std::string("head.conv") + std::to_string(l);
    Conv c;
    c.kernel = make_param(base + ".kernel", {config_.head_widths[l], cin, k, k}, cin * k * k, seed);
    c.bias = make_param(base + ".bias", {config_.head_widths[l]}, 0, seed);
    c.stride = 2;
    c.pad = pad;
    head_convs_.push_back(c);
    cin = config_.head_widths[l];
    side = conv_out_size(side, k, 2, pad);
  }
  const std::size_t flat = cin * side * side;
  fc_.weight = make_param("head.fc.weight", {config_.fc_hidden, flat}, flat, seed);
  fc_.bias = make_param("head.fc.bias", {config_.fc_hidden}, 0, seed);
  out_.weight = make_param("head.out.weight", {1, config_.fc_hidden}, 2 * config_.fc_hidden, seed);
  out_.bias = make_param("head.out.bias", {1}, 0, seed);

  if (config_.with_decoders) {
    const std::array<std::size_t, 5> widths = {w[2], w[1], w[0], w[0], 3};
    for (std::size_t d = 0; d < 4; ++d) {
      std::vector<Deconv> layers;
      std::size_t c_in = w[3];
      for (std::size_t l = 0; l < 5; ++l) {
        const auto base = layer_name("decoder", d, "deconv", l);
        const std::size_t stride = l < 4 ? config_.strides[3 - l] : 1;
        Deconv dc;
        // Each output pixel of a strided transposed conv sees about
        // c_in * (k / stride)^2 inputs.
        const std::size_t fan_in = std::max<std::size_t>(1, c_in * k * k / (stride * stride));
        dc.kernel = make_param(base + ".kernel", {c_in, widths[l], k, k}, fan_in, seed);
        dc.bias = make_param(base + ".bias", {widths[l]}, 0, seed);
        dc.stride = stride;
        dc.pad = pad;
        dc.output_pad = l < 4 ? config_.decoder_output_pads[l] : 0;
        layers.push_back(dc);
        c_in = widths[l];
      }
      decoders_.push_back(std::move(layers));
    }
  }
}

MtlModel build_model(const ModelConfig& config, std::uint64_t seed) { return MtlModel(config, seed); }

std::vector<Tensor> MtlModel::encode(std::size_t channel, const Tensor& input) const {
  std::vector<Tensor> acts;
  Tensor x = input;
  for (const auto& c : encoders_[channel]) {
    x = relu(conv2d(x, c.kernel, c.bias, c.stride, c.pad));
    acts.push_back(x);
  }
  return acts;
}

Tensor MtlModel::decode(std::size_t channel, const Tensor& features) const {
  Tensor x = features;
  const auto& layers = decoders_[channel];
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& d = layers[l];
    x = transposed_conv2d(x, d.kernel, d.bias, d.stride, d.pad, d.output_pad);
    x = l + 1 < layers.size() ? relu(x) : sigmoid(x);
  }
  return x;
}

Tensor MtlModel::head(std::span<const Tensor> top_features) const {
  Tensor x = concat_channels(top_features);
  for (const auto& c : head_convs_) x = relu(conv2d(x, c.kernel, c.bias, c.stride, c.pad));
  x = relu(dense(flatten(x), fc_.weight, fc_.bias));
  return dense(x, out_.weight, out_.bias);
}

namespace {

void check_inputs(std::span<const Tensor, 4> inputs, std::size_t side) {
  for (std::size_t i = 0; i < 4; ++i) {
    if (!inputs[i].defined()) throw ShapeError("model: input " + std::to_string(i) + " is undefined");
    const Shape want = {3, side, side};
    if (inputs[i].shape() != want) {
      throw ShapeError("model: input " + std::to_string(i) + " has shape " +
                       shape_str(inputs[i].shape()) + ", expected " + shape_str(want));
    }
  }
}

}  // namespace

Tensor MtlModel::merged_features(std::span<const Tensor, 4> inputs) const {
  check_inputs(inputs, config_.input_side);
  std::vector<Tensor> tops;
  for (std::size_t c = 0; c < 4; ++c) tops.push_back(encode(c, inputs[c]).back());
  return concat_channels(tops);
}

ForwardOutput MtlModel::forward(std::span<const Tensor, 4> inputs) const {
  check_inputs(inputs, config_.input_side);
  ForwardOutput out;
  std::vector<Tensor> tops;
  for (std::size_t c = 0; c < 4; ++c) {
    tops.push_back(encode(c, inputs[c]).back());
    if (!decoders_.empty()) out.reconstructions.push_back(decode(c, tops.back()));
  }
  out.yield_scaled = head(tops);
  return out;
}

Tensor MtlModel::forward_yield(std::span<const Tensor, 4> inputs) const {
  check_inputs(inputs, config_.input_side);
  std::vector<Tensor> tops;
  for (std::size_t c = 0; c < 4; ++c) tops.push_back(encode(c, inputs[c]).back());
  return head(tops);
}

std::vector<Parameter> MtlModel::trainable_parameters() const {
  std::vector<Parameter> out;
  for (const auto& p : params_) {
    if (config_.freeze_decoders && p.name.rfind("decoder", 0) == 0) continue;
    out.push_back(p);
  }
  return out;
}

std::size_t MtlModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

std::vector<std::vector<double>> MtlModel::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : params_) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void MtlModel::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw ShapeError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = params_[i].tensor.mutable_data();
    if (dst.size() != values[i].size()) throw ShapeError("restore: size mismatch for " + params_[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

Tensor mtl_loss(const ForwardOutput& output, std::span<const Tensor, 4> inputs, double weight_g,
                const ModelConfig& config) {
  if (weight_g < 0.0) throw DataError(DataError::Kind::kNegativeWeight, "mtl_loss: negative weight");
  const Tensor target = Tensor::scalar(weight_g / config.target_scale_g);
  Tensor loss = scale(mse_loss(output.yield_scaled, target), config.lambda_yield);
  if (config.lambda_recon > 0.0 && !output.reconstructions.empty()) {
    if (output.reconstructions.size() != 4) throw ShapeError("mtl_loss: expected 4 reconstructions");
    Tensor recon = mse_loss(output.reconstructions[0], inputs[0]);
    for (std::size_t i = 1; i < 4; ++i) recon = add(recon, mse_loss(output.reconstructions[i], inputs[i]));
    loss = add(loss, scale(recon, config.lambda_recon));
  }
  return loss;
}

std::array<Tensor, 4> single_view_inputs(std::span<const Tensor, 4> views, View view) {
  const Tensor& t = views[view_index(view)];
  if (!t.defined()) {
    throw DataError(DataError::Kind::kIncompleteExample, "single_view_inputs: view " + view_code(view) + " missing");
  }
  return {t, t, t, t};
}

double scaled_to_grams(double yield_scaled, double target_scale_g) {
  return std::max(0.0, yield_scaled) * target_scale_g;
}

double predict_yield(const MtlModel& model, std::span<const Tensor, 4> inputs) {
  return scaled_to_grams(model.forward_yield(inputs).item(), model.config().target_scale_g);
}

}  // namespace vym
