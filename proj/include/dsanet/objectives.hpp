#pragma once

#include <vector>

#include "dsanet/autograd.hpp"

namespace dsanet::objectives {

struct LossParams {
  int kernel_size = 31;
  double lambda = 5.0;
  double dice_eps = 1.0;
  double prob_clamp = 1e-7;
};

// Boundary emphasis weights W = 1 + lambda * |avgpool_k(gt) - gt|. The
// average uses same padding and divides by the number of in-image pixels,
// so uniform masks give W = 1 everywhere.
struct WeightMap {
  Tensor data;
  int kernel_size = 31;
  double lambda = 5.0;
};

WeightMap weight_map(const Tensor& gt, int kernel_size = 31, double lambda = 5.0);

// Each loss takes a probability map of any shape and a same-shaped binary
// target, and returns a differentiable scalar (shape ()).
Var dice_loss(const Var& prob, const Tensor& gt, double eps = 1.0);
Var wbce_loss(const Var& prob, const Tensor& gt, const WeightMap& weights, double clamp = 1e-7);
Var wiou_loss(const Var& prob, const Tensor& gt, const WeightMap& weights, double clamp = 1e-7);

double dice_loss(const Tensor& prob, const Tensor& gt, double eps = 1.0);
double wbce_loss(const Tensor& prob, const Tensor& gt, const WeightMap& weights, double clamp = 1e-7);
double wiou_loss(const Tensor& prob, const Tensor& gt, const WeightMap& weights, double clamp = 1e-7);

struct FrameLoss {
  double dice = 0.0;
  double wbce = 0.0;
  double wiou = 0.0;
  double sum() const { return (dice + wbce) + wiou; }
};

struct LossBreakdown {
  std::vector<FrameLoss> per_frame;  // oldest frame first; the target is last
  double total = 0.0;
};

struct LossResult {
  Var total;
  LossBreakdown breakdown;
};

// dice + wbce + wiou for a single frame.
Var frame_loss(const Var& prob, const Tensor& gt, const LossParams& params, FrameLoss* record = nullptr);

// Sum of identical per-frame losses over exactly three frames (two
// auxiliary frames and the target). breakdown.total equals total.value()
// bit for bit.
LossResult total_loss(const std::vector<Var>& probs, const std::vector<Tensor>& gts, const LossParams& params = {});

}  // namespace dsanet::objectives
