#include "dsanet/afsa.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "dsanet/errors.hpp"
#include "dsanet/ops.hpp"

namespace dsanet::afsa {

namespace {

void require_feature_pair(const Var& a, const Var& b, const char* op) {
  if (a.value().rank() != 3) throw ShapeError(std::string(op) + ": expected (C, H, W), got " + to_string(a.shape()));
  require_same_shape(a.value(), b.value(), op);
}

Var flatten_hw(const Var& f) { return ops::reshape(f, Shape{f.dim(0), f.dim(1) * f.dim(2)}); }

}  // namespace

SimilarityMap channel_similarity(const Var& previous, const Var& current, SimilarityMode mode, double eps) {
  require_feature_pair(previous, current, "channel_similarity");
  const int channels = previous.dim(0);
  const int positions = previous.dim(1) * previous.dim(2);
  if (mode == SimilarityMode::kPerChannelCosine) {
    Var cosine = ops::rowwise_cosine(flatten_hw(previous), flatten_hw(current), eps);
    return {ops::expand_cols(cosine, positions), mode};
  }
  Tensor s(Shape{channels, positions});
  const Tensor& a = previous.value();
  const Tensor& b = current.value();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double p = a[i] * b[i];
    s[i] = p > 0.0 ? 1.0 : (p < 0.0 ? -1.0 : 0.0);
  }
  return {Var(std::move(s)), mode};
}

Var refine(const SimilarityMap& similarity, const Var& features) {
  if (features.value().rank() != 3) throw ShapeError("refine: expected (C, H, W), got " + to_string(features.shape()));
  const Shape flat{features.dim(0), features.dim(1) * features.dim(2)};
  if (similarity.data.shape() != flat) {
    throw ShapeError("refine: similarity " + to_string(similarity.data.shape()) + " vs features " +
                     to_string(features.shape()));
  }
  return ops::reshape(ops::mul(similarity.data, flatten_hw(features)), features.shape());
}

Var temporal_fuse(const Var& previous_refined, const Var& current_refined) {
  require_feature_pair(previous_refined, current_refined, "temporal_fuse");
  Var gain = ops::mul(ops::global_avg_pool(previous_refined), ops::global_avg_pool(current_refined));
  return ops::channel_scale(current_refined, gain);
}

Var afsa_step(const Var& previous, const Var& current, const AfsaConfig& config) {
  SimilarityMap s = channel_similarity(previous, current, config.mode, config.eps);
  return temporal_fuse(refine(s, previous), refine(s, current));
}

Var afsa_chain(const std::vector<Var>& features, const AfsaConfig& config) {
  if (features.size() < 2) throw ArityError("afsa_chain needs at least 2 frames, got " + std::to_string(features.size()));
  for (std::size_t i = 1; i < features.size(); ++i) require_feature_pair(features[0], features[i], "afsa_chain");
  Var fused = afsa_step(features[0], features[1], config);
  for (std::size_t i = 2; i < features.size(); ++i) fused = afsa_step(fused, features[i], config);
  return fused;
}

Tensor pixel_cross_attention_fuse(const Tensor& previous, const Tensor& current, const CrossAttentionWeights& weights) {
  if (previous.rank() != 3) throw ShapeError("pixel_cross_attention_fuse: expected (C, H, W)");
  require_same_shape(previous, current, "pixel_cross_attention_fuse");
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const int channels = previous.dim(0);
  const int tokens = previous.dim(1) * previous.dim(2);
  // Token-major views (HW, C).
  const Matrix cur = Eigen::Map<const Matrix>(current.data(), channels, tokens).transpose();
  const Matrix prev = Eigen::Map<const Matrix>(previous.data(), channels, tokens).transpose();
  auto project = [channels](const Matrix& x, const Tensor& w) -> Matrix {
    if (w.empty()) return x;
    if (w.shape() != Shape{channels, channels}) throw ShapeError("cross-attention projection must be (C, C)");
    return x * Eigen::Map<const Matrix>(w.data(), channels, channels);
  };
  const Matrix q = project(cur, weights.query);
  const Matrix k = project(prev, weights.key);
  const Matrix v = project(prev, weights.value);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(channels));

  Matrix out(tokens, channels);
  constexpr int kBlock = 256;
  Matrix scores;
  for (int begin = 0; begin < tokens; begin += kBlock) {
    const int rows = std::min(kBlock, tokens - begin);
    scores.noalias() = (q.middleRows(begin, rows) * k.transpose()) * inv_sqrt_d;
    for (int r = 0; r < rows; ++r) {
      auto row = scores.row(r);
      const double mx = row.maxCoeff();
      row = (row.array() - mx).exp();
      row /= row.sum();
    }
    out.middleRows(begin, rows).noalias() = scores * v;
  }
  Tensor result(previous.shape());
  Eigen::Map<Matrix>(result.data(), channels, tokens) = out.transpose();
  return result;
}

}  // namespace dsanet::afsa
