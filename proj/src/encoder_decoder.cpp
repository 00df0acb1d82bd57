#include "dsanet/encoder_decoder.hpp"

#include "dsanet/errors.hpp"
#include "dsanet/ops.hpp"

namespace dsanet {

void FeaturePyramid::validate() const {
  for (int i = 0; i < 4; ++i) {
    if (!levels[i].defined() || levels[i].value().rank() != 3) throw ShapeError("pyramid level missing or not (C,H,W)");
    if (levels[i].dim(0) != levels[0].dim(0)) throw ShapeError("pyramid levels disagree on channel count");
    if (i > 0) {
      if (levels[i].dim(1) * 2 != levels[i - 1].dim(1) || levels[i].dim(2) * 2 != levels[i - 1].dim(2)) {
        throw ShapeError("pyramid level " + std::to_string(i + 1) + " " + to_string(levels[i].shape()) +
                         " is not half of level " + std::to_string(i) + " " + to_string(levels[i - 1].shape()));
      }
      if (strides[i] != strides[i - 1] * 2) throw ShapeError("pyramid strides must double per level");
    }
  }
}

void BackboneConfig::validate() const {
  if (stem_channels < 1) throw ConfigError("stem_channels must be >= 1");
  for (int c : stage_channels)
    if (c < 1) throw ConfigError("stage_channels entries must be >= 1");
  if (fusion_channels < 2 || fusion_channels % 2 != 0) {
    throw ConfigError("fusion_channels must be a positive even number, got " + std::to_string(fusion_channels));
  }
}

EncoderDecoder::Conv EncoderDecoder::make_conv(ParameterStore& params, Rng& rng, const std::string& name, int in,
                                               int out, int k, int stride) {
  Conv c;
  c.weight = params.add(name + ".weight", fan_in_uniform(Shape{out, in, k, k}, in * k * k, rng));
  c.bias = params.add(name + ".bias", Tensor(Shape{out}));
  c.stride = stride;
  c.padding = k / 2;
  return c;
}

Var EncoderDecoder::apply(const Conv& c, const Var& x) { return ops::conv2d(x, c.weight, c.bias, c.stride, c.padding); }

EncoderDecoder::EncoderDecoder(const BackboneConfig& config, ParameterStore& params, Rng& rng,
                               const std::string& prefix)
    : config_(config) {
  config_.validate();
  stem_ = make_conv(params, rng, prefix + "stem", 1, config_.stem_channels, 3, 2);
  int in = config_.stem_channels;
  for (int i = 0; i < 4; ++i) {
    const int out = config_.stage_channels[i];
    const std::string s = prefix + "stage" + std::to_string(i + 1);
    down_[i] = make_conv(params, rng, s + ".down", in, out, 3, 2);
    refine_[i] = make_conv(params, rng, s + ".refine", out, out, 3, 1);
    in = out;
  }
  const int cf = config_.fusion_channels;
  for (int i = 0; i < 4; ++i) {
    const std::string s = prefix + "decoder" + std::to_string(i + 1);
    lateral_[i] = make_conv(params, rng, s + ".lateral", config_.stage_channels[i], cf, 1, 1);
    smooth_[i] = make_conv(params, rng, s + ".smooth", cf, cf, 3, 1);
  }
}

std::vector<Var> EncoderDecoder::encode(const Var& frame) const {
  Var x = frame;
  if (x.value().rank() == 2) x = ops::reshape(x, Shape{1, x.dim(0), x.dim(1)});
  if (x.value().rank() != 3 || x.dim(0) != 1) throw ShapeError("encode expects a single-channel frame, got " + to_string(x.shape()));
  if (x.dim(1) % 32 != 0 || x.dim(2) % 32 != 0 || x.dim(1) == 0 || x.dim(2) == 0) {
    throw ShapeError("encode: frame size " + to_string(x.shape()) + " not divisible by 32");
  }
  // Fixed affine input standardisation around the nominal [0, 1] range.
  x = ops::scale(ops::add_scalar(x, -0.5), 4.0);
  x = ops::relu(apply(stem_, x));
  std::vector<Var> stages;
  for (int i = 0; i < 4; ++i) {
    x = ops::relu(apply(down_[i], x));
    x = ops::relu(apply(refine_[i], x));
    stages.push_back(x);
  }
  return stages;
}

std::vector<Var> EncoderDecoder::encode(const Image& frame) const { return encode(Var(frame)); }

FeaturePyramid EncoderDecoder::decode_local(const std::vector<Var>& stages) const {
  if (stages.size() != 4) throw ShapeError("decode_local needs 4 stage maps, got " + std::to_string(stages.size()));
  for (int i = 0; i < 4; ++i) {
    if (stages[i].value().rank() != 3 || stages[i].dim(0) != config_.stage_channels[i]) {
      throw ShapeError("decode_local: stage " + std::to_string(i + 1) + " has shape " + to_string(stages[i].shape()) +
                       ", expected " + std::to_string(config_.stage_channels[i]) + " channels");
    }
    if (i > 0 && (stages[i].dim(1) * 2 != stages[i - 1].dim(1) || stages[i].dim(2) * 2 != stages[i - 1].dim(2))) {
      throw ShapeError("decode_local: stage strides do not double between levels " + std::to_string(i) + " and " +
                       std::to_string(i + 1));
    }
  }
  FeaturePyramid pyramid;
  Var merged;
  for (int i = 3; i >= 0; --i) {
    Var lateral = apply(lateral_[i], stages[i]);
    if (merged.defined()) {
      lateral = ops::add(lateral, ops::upsample_bilinear(merged, stages[i].dim(1), stages[i].dim(2)));
    }
    merged = lateral;
    pyramid.levels[i] = ops::relu(apply(smooth_[i], merged));
  }
  return pyramid;
}

}  // namespace dsanet
