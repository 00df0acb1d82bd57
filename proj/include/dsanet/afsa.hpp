#pragma once

#include <vector>

#include "dsanet/autograd.hpp"

namespace dsanet::afsa {

enum class SimilarityMode {
  // Cosine of each channel's HW-flattened activations, broadcast over HW.
  kPerChannelCosine,
  // Scalar cosine per entry, i.e. sign(a * b) with 0 when either is 0.
  // Piecewise constant, so it carries no gradient.
  kElementwiseLiteral,
};

inline constexpr double kDefaultEps = 1e-8;

struct SimilarityMap {
  Var data;  // (C, HW)
  SimilarityMode mode = SimilarityMode::kPerChannelCosine;
};

struct AfsaConfig {
  SimilarityMode mode = SimilarityMode::kPerChannelCosine;
  double eps = kDefaultEps;
};

// Similarity between two (C, H, W) maps of identical shape. Channels with a
// zero norm in either frame get similarity 0.
SimilarityMap channel_similarity(const Var& previous, const Var& current,
                                 SimilarityMode mode = SimilarityMode::kPerChannelCosine, double eps = kDefaultEps);

// S (.) F with F viewed as (C, HW); returns (C, H, W).
Var refine(const SimilarityMap& similarity, const Var& features);

// GAP(prev') (.) cur' (.) GAP(cur'), GAP broadcast per channel.
Var temporal_fuse(const Var& previous_refined, const Var& current_refined);

// One pairwise step: similarity, refine both maps, temporal fusion.
Var afsa_step(const Var& previous, const Var& current, const AfsaConfig& config = {});

// Cascade over T >= 2 frames, oldest first: g = step(f0, f1); g = step(g, f2); ...
// The result is the fused map of the last (target) frame.
Var afsa_chain(const std::vector<Var>& features, const AfsaConfig& config = {});

// Pixel-level reference: softmax(Q K^T / sqrt(C)) V over HW tokens with the
// current frame as queries and the previous frame as keys and values.
// Projections default to identity. Forward only, computed in query blocks so
// the HW x HW score matrix is never materialised in full.
struct CrossAttentionWeights {
  Tensor query, key, value;  // (C, C) each; empty means identity
};
Tensor pixel_cross_attention_fuse(const Tensor& previous, const Tensor& current,
                                  const CrossAttentionWeights& weights = {});

}  // namespace dsanet::afsa
