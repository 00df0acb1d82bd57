#include "dsanet/model.hpp"

#include <algorithm>
#include <cctype>

#include "dsanet/errors.hpp"
#include "dsanet/ops.hpp"

namespace dsanet {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "BASELINE";
    case Variant::kBaselineAfsa: return "BASELINE_AFSA";
    case Variant::kBaselineLgsa: return "BASELINE_LGSA";
    case Variant::kFull: return "FULL";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  std::string upper = name;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::toupper(c));
  });
  for (Variant v : kAllVariants)
    if (to_string(v) == upper) return v;
  throw ConfigError("unknown variant '" + name + "' (expected BASELINE, BASELINE_AFSA, BASELINE_LGSA or FULL)");
}

VariantGraph VariantGraph::of(Variant v) {
  switch (v) {
    case Variant::kBaseline: return {false, false};
    case Variant::kBaselineAfsa: return {true, false};
    case Variant::kBaselineLgsa: return {false, true};
    case Variant::kFull: return {true, true};
  }
  return {};
}

std::string VariantGraph::describe() const {
  std::string s = "encoder_decoder";
  if (afsa) s += " -> afsa_chain(finest level of T frames)";
  if (lgsa) {
    s += afsa ? " -> lgsa(f_a = fused target)" : " -> lgsa(f_a = raw target finest level)";
    s += " -> fused pyramid head";
  } else {
    s += afsa ? " -> pyramid head(level1 = fused target)" : " -> pyramid head";
  }
  s += "; aux frames: pyramid head";
  return s;
}

DsaNet::DsaNet(const ModelConfig& config)
    : config_(config),
      init_rng_(config.backbone.parameter_init_seed),
      backbone_(config.backbone, params_, init_rng_) {
  if (config_.clip_length < 2 && VariantGraph::of(config_.variant).afsa) {
    throw ConfigError("variants with AFSA need clip_length >= 2");
  }
  if (config_.clip_length < 1) throw ConfigError("clip_length must be >= 1");
  const int cf = config_.backbone.fusion_channels;
  aux_head_ = lgsa::HeadParams::create(4 * cf, params_, init_rng_, "head.pyramid");
  has_lgsa_ = VariantGraph::of(config_.variant).lgsa;
  if (has_lgsa_) {
    attention_ = lgsa::AttentionParams::create(config_.attention, cf, params_, init_rng_);
    global_ = lgsa::GlobalPyramidParams::create(cf, params_, init_rng_);
    lgsa_head_ = lgsa::HeadParams::create(8 * cf, params_, init_rng_, "lgsa.head");
  }
}

VariantGraph DsaNet::graph() const {
  VariantGraph g = VariantGraph::of(config_.variant);
  g.afsa = g.afsa && config_.afsa_enabled;
  return g;
}

Var DsaNet::lightweight_head(const FeaturePyramid& pyramid, int height, int width) const {
  std::vector<Var> parts;
  for (const Var& level : pyramid.levels) parts.push_back(ops::upsample_bilinear(level, height, width));
  return ops::conv2d(ops::concat_channels(parts), aux_head_.weight, aux_head_.bias, 1, 0);
}

Var DsaNet::predict_from_pyramids(const std::vector<const FeaturePyramid*>& context, int height, int width) const {
  const VariantGraph g = graph();
  const FeaturePyramid& local = *context.back();
  Var f_a = local.levels[0];
  if (g.afsa && context.size() >= 2) {
    std::vector<Var> finest;
    for (const FeaturePyramid* p : context) finest.push_back(p->levels[0]);
    // The fused map grows with a high power of feature scale; bring it back to
    // unit RMS so the head and attention logits start in a trainable range.
    f_a = ops::rms_normalize(afsa::afsa_chain(finest, config_.afsa));
  }
  if (!g.lgsa) {
    FeaturePyramid merged = local;
    merged.levels[0] = f_a;
    return lightweight_head(merged, height, width);
  }
  Var enhanced = lgsa::self_attention_enhance(f_a, config_.attention, attention_);
  auto global = lgsa::build_global_pyramid(enhanced, global_);
  return lgsa::predict(lgsa::reassemble_pyramid(global, local), height, width, lgsa_head_);
}

ClipOutput DsaNet::forward(const std::vector<Image>& frames) const {
  const int t = static_cast<int>(frames.size());
  if (t != config_.clip_length) {
    throw ArityError("model expects clips of " + std::to_string(config_.clip_length) + " frames, got " + std::to_string(t));
  }
  const int height = frames[0].dim(0), width = frames[0].dim(1);
  std::vector<FeaturePyramid> pyramids;
  for (const Image& f : frames) pyramids.push_back(backbone_.decode_local(backbone_.encode(f)));

  ClipOutput out;
  for (int k = 0; k < t; ++k) {
    if (k == t - 1 || config_.aux_path == AuxPath::kFullPath) {
      std::vector<const FeaturePyramid*> context;
      for (int j = 0; j < t; ++j) context.push_back(&pyramids[std::max(0, k - (t - 1) + j)]);
      out.logits.push_back(predict_from_pyramids(context, height, width));
    } else {
      out.logits.push_back(lightweight_head(pyramids[k], height, width));
    }
  }
  return out;
}

Var DsaNet::forward_target(const std::vector<Image>& frames) const {
  if (static_cast<int>(frames.size()) != config_.clip_length) {
    throw ArityError("model expects clips of " + std::to_string(config_.clip_length) + " frames");
  }
  const int height = frames[0].dim(0), width = frames[0].dim(1);
  const VariantGraph g = graph();
  std::vector<FeaturePyramid> pyramids;
  // Without AFSA only the target frame's own features are needed.
  const std::size_t first = g.afsa ? 0 : frames.size() - 1;
  for (std::size_t i = first; i < frames.size(); ++i) pyramids.push_back(backbone_.decode_local(backbone_.encode(frames[i])));
  std::vector<const FeaturePyramid*> context;
  for (const auto& p : pyramids) context.push_back(&p);
  return predict_from_pyramids(context, height, width);
}

std::vector<std::string> DsaNet::architecture_signature() const {
  std::vector<std::string> sig;
  for (const auto& [name, v] : params_.entries()) sig.push_back(name + ":" + dsanet::to_string(v.shape()));
  const VariantGraph g = graph();
  sig.push_back(std::string("graph.afsa:") + (g.afsa ? "1" : "0"));
  sig.push_back(std::string("graph.lgsa:") + (g.lgsa ? "1" : "0"));
  std::sort(sig.begin(), sig.end());
  return sig;
}

}  // namespace dsanet
