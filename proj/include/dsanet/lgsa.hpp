#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "dsanet/autograd.hpp"
#include "dsanet/encoder_decoder.hpp"
#include "dsanet/parameters.hpp"

namespace dsanet::lgsa {

struct AttentionConfig {
  int num_layers = 2;
  int projection_dim = 0;  // 0 selects the input channel count
  bool use_residual = true;

  void validate() const;
};

// Per-layer projections; tokens are rows of an (HW, C) matrix.
struct AttentionLayer {
  Var query_weight, query_bias;  // (C, d), (d)
  Var key_weight, key_bias;      // (C, d), (d)
  Var value_weight, value_bias;  // (C, C), (C)
};

struct AttentionParams {
  std::vector<AttentionLayer> layers;
  int projection_dim = 0;

  static AttentionParams create(const AttentionConfig& config, int channels, ParameterStore& params, Rng& rng,
                                const std::string& prefix = "lgsa.attention.");
};

// Stacked single-head self-attention over the HW spatial tokens of f_a.
// When `attention_weights` is given, each layer's (HW, HW) softmax matrix is
// appended to it.
Var self_attention_enhance(const Var& features, const AttentionConfig& config, const AttentionParams& params,
                           std::vector<Tensor>* attention_weights = nullptr);

struct GlobalPyramidParams {
  std::array<Var, 3> weight, bias;  // 3x3 stride-2 convs, (C, C, 3, 3) / (C)

  static GlobalPyramidParams create(int channels, ParameterStore& params, Rng& rng,
                                    const std::string& prefix = "lgsa.global.");
};

// Level 1 is the input itself; levels 2..4 each apply conv3x3/stride 2 + ReLU.
std::array<Var, 4> build_global_pyramid(const Var& enhanced, const GlobalPyramidParams& params);

// fus1 = [g[:C/2], l[C/2:]], fus2 = [g[C/2:], l[:C/2]].
std::pair<Var, Var> channel_reassemble(const Var& global, const Var& local);

struct FusedPyramid {
  std::array<Var, 4> fus1, fus2;
};

FusedPyramid reassemble_pyramid(const std::array<Var, 4>& global, const FeaturePyramid& local);

struct HeadParams {
  Var weight, bias;  // (1, in_channels, 1, 1), (1)

  static HeadParams create(int in_channels, ParameterStore& params, Rng& rng, const std::string& prefix);
};

// Upsamples every fused map to (height, width), concatenates fus1 levels
// (fine to coarse) then fus2 levels, and applies a 1x1 conv to one logit
// channel. Returns (1, height, width) logits.
Var predict(const FusedPyramid& fused, int height, int width, const HeadParams& head);

}  // namespace dsanet::lgsa
