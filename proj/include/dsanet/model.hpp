#pragma once

#include <array>
#include <string>
#include <vector>

#include "dsanet/afsa.hpp"
#include "dsanet/encoder_decoder.hpp"
#include "dsanet/lgsa.hpp"
#include "dsanet/parameters.hpp"

namespace dsanet {

enum class Variant { kBaseline, kBaselineAfsa, kBaselineLgsa, kFull };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);  // accepts BASELINE, BASELINE_AFSA, ... (case-insensitive)
inline constexpr std::array<Variant, 4> kAllVariants{Variant::kBaseline, Variant::kBaselineAfsa, Variant::kBaselineLgsa,
                                                      Variant::kFull};

// How the two auxiliary (non-target) frames are predicted.
enum class AuxPath {
  kLightweightHead,  // shared 1x1 head on the frame's own local pyramid
  kFullPath,         // the variant's full path with the frame as target
};

// Which modules a forward pass actually uses.
struct VariantGraph {
  bool afsa = false;
  bool lgsa = false;

  static VariantGraph of(Variant v);
  std::string describe() const;
  bool operator==(const VariantGraph&) const = default;
};

struct ModelConfig {
  Variant variant = Variant::kFull;
  BackboneConfig backbone;
  lgsa::AttentionConfig attention;
  afsa::AfsaConfig afsa;
  AuxPath aux_path = AuxPath::kLightweightHead;
  bool afsa_enabled = true;  // runtime switch; off turns FULL into BASELINE_LGSA wiring
  int clip_length = 3;
};

struct ClipOutput {
  std::vector<Var> logits;  // one (1, H, W) map per input frame, target last
};

class DsaNet {
 public:
  explicit DsaNet(const ModelConfig& config);
  DsaNet(const DsaNet&) = delete;
  DsaNet& operator=(const DsaNet&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  VariantGraph graph() const;

  // frames: T images (H, W), oldest first. Returns logits for every frame.
  ClipOutput forward(const std::vector<Image>& frames) const;
  // Target-frame logits only; skips auxiliary heads.
  Var forward_target(const std::vector<Image>& frames) const;

  // Sorted "name:shape" list; equal for models with identical architecture.
  std::vector<std::string> architecture_signature() const;

 private:
  // context: T pyramids, oldest first; the last one is the frame predicted.
  Var predict_from_pyramids(const std::vector<const FeaturePyramid*>& context, int height, int width) const;
  Var lightweight_head(const FeaturePyramid& pyramid, int height, int width) const;

  ModelConfig config_;
  ParameterStore params_;
  Rng init_rng_;
  EncoderDecoder backbone_;
  lgsa::HeadParams aux_head_;
  bool has_lgsa_ = false;
  lgsa::AttentionParams attention_;
  lgsa::GlobalPyramidParams global_;
  lgsa::HeadParams lgsa_head_;
};

}  // namespace dsanet
