#include "dsanet/speckle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dsanet/errors.hpp"
#include "dsanet/rng.hpp"

namespace dsanet {

void SpeckleConfig::validate() const {
  if (!(look > 0.0)) throw ConfigError("speckle look number L must be > 0, got " + std::to_string(look));
}

std::string noise_tag(const SpeckleConfig& config) {
  if (config.is_clean()) return "clean";
  std::ostringstream s;
  s << 'L' << config.look;
  return s.str();
}

Image apply_speckle(const Image& image, const SpeckleConfig& config) {
  config.validate();
  if (config.is_clean()) return image;
  Rng rng(config.seed);
  std::gamma_distribution<double> gain(config.look, 1.0 / config.look);
  Image out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = image[i] * gain(rng);
    out[i] = config.clip_output ? std::clamp(v, 0.0, 1.0) : v;
  }
  return out;
}

ClipSample apply_speckle_clip(const ClipSample& clip, const SpeckleConfig& config) {
  config.validate();
  ClipSample out = clip;
  out.noise_tag = noise_tag(config);
  if (config.is_clean()) return out;
  const std::uint64_t video_seed = derive_seed(config.seed, hash_string(clip.video_id));
  for (std::size_t k = 0; k < out.frames.size(); ++k) {
    const int source = k < clip.frame_indices.size() ? clip.frame_indices[k] : static_cast<int>(k);
    SpeckleConfig frame_cfg = config;
    frame_cfg.seed = derive_seed(video_seed, static_cast<std::uint64_t>(source));
    out.frames[k] = apply_speckle(clip.frames[k], frame_cfg);
  }
  return out;
}

}  // namespace dsanet
