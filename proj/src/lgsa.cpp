#include "dsanet/lgsa.hpp"

#include <cmath>

#include "dsanet/errors.hpp"
#include "dsanet/ops.hpp"

namespace dsanet::lgsa {

void AttentionConfig::validate() const {
  if (num_layers < 1) throw ConfigError("attention num_layers must be >= 1");
  if (projection_dim < 0) throw ConfigError("attention projection_dim must be > 0 (or 0 for the channel count)");
}

AttentionParams AttentionParams::create(const AttentionConfig& config, int channels, ParameterStore& params, Rng& rng,
                                        const std::string& prefix) {
  config.validate();
  AttentionParams p;
  p.projection_dim = config.projection_dim > 0 ? config.projection_dim : channels;
  const int d = p.projection_dim;
  for (int i = 0; i < config.num_layers; ++i) {
    const std::string s = prefix + "layer" + std::to_string(i + 1);
    AttentionLayer layer;
    auto linear = [&](const std::string& name, int out) {
      return params.add(s + "." + name + ".weight", fan_in_uniform(Shape{channels, out}, channels, rng, kLinearGain));
    };
    layer.query_weight = linear("query", d);
    layer.query_bias = params.add(s + ".query.bias", Tensor(Shape{d}));
    layer.key_weight = linear("key", d);
    layer.key_bias = params.add(s + ".key.bias", Tensor(Shape{d}));
    layer.value_weight = linear("value", channels);
    layer.value_bias = params.add(s + ".value.bias", Tensor(Shape{channels}));
    p.layers.push_back(layer);
  }
  return p;
}

Var self_attention_enhance(const Var& features, const AttentionConfig& config, const AttentionParams& params,
                           std::vector<Tensor>* attention_weights) {
  config.validate();
  if (features.value().rank() != 3) throw ShapeError("self_attention_enhance: expected (C, H, W)");
  if (static_cast<int>(params.layers.size()) < config.num_layers) {
    throw ConfigError("self_attention_enhance: config asks for more layers than parameters provide");
  }
  const int channels = features.dim(0), h = features.dim(1), w = features.dim(2);
  if (params.layers.front().value_weight.dim(0) != channels) {
    throw ShapeError("self_attention_enhance: parameters built for " +
                     std::to_string(params.layers.front().value_weight.dim(0)) + " channels, input has " +
                     std::to_string(channels));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.projection_dim));
  Var tokens = ops::transpose(ops::reshape(features, Shape{channels, h * w}));  // (HW, C)
  for (int i = 0; i < config.num_layers; ++i) {
    const AttentionLayer& layer = params.layers[i];
    Var q = ops::add_row_bias(ops::matmul(tokens, layer.query_weight), layer.query_bias);
    Var k = ops::add_row_bias(ops::matmul(tokens, layer.key_weight), layer.key_bias);
    Var v = ops::add_row_bias(ops::matmul(tokens, layer.value_weight), layer.value_bias);
    Var attention = ops::softmax_rows(ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt_d));
    if (attention_weights) attention_weights->push_back(attention.value());
    Var out = ops::matmul(attention, v);
    tokens = config.use_residual ? ops::add(out, tokens) : out;
  }
  return ops::reshape(ops::transpose(tokens), Shape{channels, h, w});
}

GlobalPyramidParams GlobalPyramidParams::create(int channels, ParameterStore& params, Rng& rng,
                                                const std::string& prefix) {
  GlobalPyramidParams p;
  for (int i = 0; i < 3; ++i) {
    const std::string s = prefix + "down" + std::to_string(i + 1);
    p.weight[i] = params.add(s + ".weight", fan_in_uniform(Shape{channels, channels, 3, 3}, channels * 9, rng));
    p.bias[i] = params.add(s + ".bias", Tensor(Shape{channels}));
  }
  return p;
}

std::array<Var, 4> build_global_pyramid(const Var& enhanced, const GlobalPyramidParams& params) {
  if (enhanced.value().rank() != 3) throw ShapeError("build_global_pyramid: expected (C, H, W)");
  if (enhanced.dim(1) < 8 || enhanced.dim(2) < 8 || enhanced.dim(1) % 8 != 0 || enhanced.dim(2) % 8 != 0) {
    throw ShapeError("build_global_pyramid: input " + to_string(enhanced.shape()) +
                     " cannot be halved three times (need spatial size >= 8 and divisible by 8)");
  }
  if (params.weight[0].dim(1) != enhanced.dim(0)) throw ShapeError("build_global_pyramid: channel mismatch");
  std::array<Var, 4> levels;
  levels[0] = enhanced;
  for (int i = 0; i < 3; ++i) levels[i + 1] = ops::relu(ops::conv2d(levels[i], params.weight[i], params.bias[i], 2, 1));
  return levels;
}

std::pair<Var, Var> channel_reassemble(const Var& global, const Var& local) {
  if (global.value().rank() != 3) throw ShapeError("channel_reassemble: expected (C, H, W)");
  require_same_shape(global.value(), local.value(), "channel_reassemble");
  const int channels = global.dim(0);
  if (channels % 2 != 0) throw ShapeError("channel_reassemble: channel count " + std::to_string(channels) + " is odd");
  const int half = channels / 2;
  Var fus1 = ops::concat_channels({ops::slice_channels(global, 0, half), ops::slice_channels(local, half, channels)});
  Var fus2 = ops::concat_channels({ops::slice_channels(global, half, channels), ops::slice_channels(local, 0, half)});
  return {fus1, fus2};
}

FusedPyramid reassemble_pyramid(const std::array<Var, 4>& global, const FeaturePyramid& local) {
  FusedPyramid fused;
  for (int i = 0; i < 4; ++i) std::tie(fused.fus1[i], fused.fus2[i]) = channel_reassemble(global[i], local.levels[i]);
  return fused;
}

HeadParams HeadParams::create(int in_channels, ParameterStore& params, Rng& rng, const std::string& prefix) {
  HeadParams h;
  h.weight = params.add(prefix + ".weight", fan_in_uniform(Shape{1, in_channels, 1, 1}, in_channels, rng, kLinearGain));
  h.bias = params.add(prefix + ".bias", Tensor(Shape{1}));
  return h;
}

Var predict(const FusedPyramid& fused, int height, int width, const HeadParams& head) {
  std::vector<Var> parts;
  for (const auto* group : {&fused.fus1, &fused.fus2})
    for (const Var& level : *group) {
      if (!level.defined() || level.value().rank() != 3) throw ShapeError("predict: fused level missing or not (C,H,W)");
      parts.push_back(ops::upsample_bilinear(level, height, width));
    }
  Var stacked = ops::concat_channels(parts);
  if (head.weight.dim(1) != stacked.dim(0)) {
    throw ShapeError("predict: head expects " + std::to_string(head.weight.dim(1)) + " channels, pyramid gives " +
                     std::to_string(stacked.dim(0)));
  }
  return ops::conv2d(stacked, head.weight, head.bias, 1, 0);
}

}  // namespace dsanet::lgsa
