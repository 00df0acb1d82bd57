#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dsanet/autograd.hpp"
#include "dsanet/parameters.hpp"
#include "dsanet/tensor.hpp"

namespace dsanet {

// A feature map is a Var of shape (C, H, W); the pyramid records strides
// relative to the network input.
struct FeaturePyramid {
  std::array<Var, 4> levels;
  std::array<int, 4> strides{4, 8, 16, 32};

  int channels() const { return levels[0].dim(0); }
  // ShapeError unless four levels halve spatially and share one channel count.
  void validate() const;
};

struct BackboneConfig {
  int stem_channels = 8;
  std::array<int, 4> stage_channels{16, 24, 32, 48};
  int fusion_channels = 32;
  std::uint64_t parameter_init_seed = 1;

  void validate() const;
};

// Small 4-stage CNN (strides 4..32) plus an FPN-style top-down decoder that
// projects each stage to `fusion_channels` and merges coarser levels through
// bilinear upsampling and skip additions.
class EncoderDecoder {
 public:
  EncoderDecoder(const BackboneConfig& config, ParameterStore& params, Rng& init_rng,
                 const std::string& prefix = "backbone.");

  const BackboneConfig& config() const { return config_; }

  // frame: (H, W) image or (1, H, W) Var. H and W must be multiples of 32.
  std::vector<Var> encode(const Var& frame) const;
  std::vector<Var> encode(const Image& frame) const;

  FeaturePyramid decode_local(const std::vector<Var>& stages) const;

 private:
  struct Conv {
    Var weight, bias;
    int stride, padding;
  };
  Conv make_conv(ParameterStore& params, Rng& rng, const std::string& name, int in, int out, int k, int stride);
  static Var apply(const Conv& c, const Var& x);

  BackboneConfig config_;
  Conv stem_;
  std::array<Conv, 4> down_, refine_, lateral_, smooth_;
};

}  // namespace dsanet
