#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "dsanet/synth_data.hpp"
#include "dsanet/tensor.hpp"

namespace dsanet {

// Multiplicative speckle: out = in * n with n ~ Gamma(shape = L, scale = 1/L),
// so E[n] = 1 and Var[n] = 1/L. Lower look numbers are noisier.
struct SpeckleConfig {
  double look = std::numeric_limits<double>::infinity();  // infinity means "clean"
  std::uint64_t seed = 0;
  bool clip_output = true;

  static SpeckleConfig clean() { return {}; }
  static SpeckleConfig with_look(double look, std::uint64_t seed, bool clip = true) { return {look, seed, clip}; }

  bool is_clean() const { return look == std::numeric_limits<double>::infinity(); }
  void validate() const;  // ConfigError unless look > 0
};

// "clean", "L25", "L20", otherwise "L<look>".
std::string noise_tag(const SpeckleConfig& config);

Image apply_speckle(const Image& image, const SpeckleConfig& config);

// Frame k of the clip is noised with a seed derived from (config.seed,
// video_id, source frame index), so a source frame receives the same noise
// field in every clip that contains it. Masks are left untouched.
ClipSample apply_speckle_clip(const ClipSample& clip, const SpeckleConfig& config);

}  // namespace dsanet
