#include "dsanet/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "dsanet/errors.hpp"
#include "dsanet/ops.hpp"

namespace dsanet::objectives {

namespace {

void require_binary_target(const Tensor& prob, const Tensor& gt, const char* op) {
  require_same_shape(prob, gt, op);
}

double clamp_prob(double p, double c) { return std::clamp(p, c, 1.0 - c); }
bool inside_clamp(double p, double c) { return p > c && p < 1.0 - c; }

}  // namespace

WeightMap weight_map(const Tensor& gt, int kernel_size, double lambda) {
  if (gt.rank() != 2) throw ShapeError("weight_map: expected (H, W) mask, got " + to_string(gt.shape()));
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("weight_map: kernel_size must be odd and positive, got " + std::to_string(kernel_size));
  }
  const int h = gt.dim(0), w = gt.dim(1), r = kernel_size / 2;
  // Summed-area table with a zero border row/column.
  std::vector<double> integral(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
  auto I = [&](int y, int x) -> double& { return integral[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) I(y + 1, x + 1) = gt.at(y, x) + I(y, x + 1) + I(y + 1, x) - I(y, x);
  WeightMap out{Tensor(gt.shape()), kernel_size, lambda};
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h, y + r + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w, x + r + 1);
      const double s = I(y1, x1) - I(y0, x1) - I(y1, x0) + I(y0, x0);
      const double avg = s / static_cast<double>((y1 - y0) * (x1 - x0));
      out.data.at(y, x) = 1.0 + lambda * std::abs(avg - gt.at(y, x));
    }
  }
  return out;
}

Var dice_loss(const Var& prob, const Tensor& gt, double eps) {
  require_binary_target(prob.value(), gt, "dice_loss");
  const Tensor& p = prob.value();
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += p[i] * gt[i];
    sp += p[i];
    sg += gt[i];
  }
  const double num = 2.0 * inter + eps, den = sp + sg + eps;
  Tensor out(Shape{}, 1.0 - num / den);
  return Var::from_op(std::move(out), {prob}, [gt, num, den](Node& n) {
    Tensor* g = n.parent_grad(0);
    if (!g) return;
    const double up = n.grad[0];
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= up * (2.0 * gt[i] * den - num) / (den * den);
  });
}

Var wbce_loss(const Var& prob, const Tensor& gt, const WeightMap& weights, double clamp) {
  require_binary_target(prob.value(), gt, "wbce_loss");
  if (weights.data.size() != gt.size()) throw ShapeError("wbce_loss: weight map size mismatch");
  const Tensor& p = prob.value();
  const Tensor& wm = weights.data;
  double weighted = 0.0, total_w = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = clamp_prob(p[i], clamp);
    const double bce = -(gt[i] * std::log(pc) + (1.0 - gt[i]) * std::log(1.0 - pc));
    weighted += wm[i] * bce;
    total_w += wm[i];
  }
  Tensor out(Shape{}, weighted / total_w);
  return Var::from_op(std::move(out), {prob}, [gt, wm, total_w, clamp](Node& n) {
    Tensor* g = n.parent_grad(0);
    if (!g) return;
    const Tensor& pv = n.parent_value(0);
    const double up = n.grad[0];
    for (std::size_t i = 0; i < g->size(); ++i) {
      if (!inside_clamp(pv[i], clamp)) continue;
      const double d = -gt[i] / pv[i] + (1.0 - gt[i]) / (1.0 - pv[i]);
      (*g)[i] += up * wm[i] * d / total_w;
    }
  });
}

Var wiou_loss(const Var& prob, const Tensor& gt, const WeightMap& weights, double clamp) {
  require_binary_target(prob.value(), gt, "wiou_loss");
  if (weights.data.size() != gt.size()) throw ShapeError("wiou_loss: weight map size mismatch");
  const Tensor& p = prob.value();
  const Tensor& wm = weights.data;
  double inter = 0.0, uni = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = clamp_prob(p[i], clamp);
    inter += wm[i] * pc * gt[i];
    uni += wm[i] * (pc + gt[i] - pc * gt[i]);
  }
  const double num = inter + 1.0, den = uni + 1.0;
  Tensor out(Shape{}, 1.0 - num / den);
  return Var::from_op(std::move(out), {prob}, [gt, wm, num, den, clamp](Node& n) {
    Tensor* g = n.parent_grad(0);
    if (!g) return;
    const Tensor& pv = n.parent_value(0);
    const double up = n.grad[0];
    for (std::size_t i = 0; i < g->size(); ++i) {
      if (!inside_clamp(pv[i], clamp)) continue;
      const double d_num = wm[i] * gt[i];
      const double d_den = wm[i] * (1.0 - gt[i]);
      (*g)[i] -= up * (d_num * den - num * d_den) / (den * den);
    }
  });
}

double dice_loss(const Tensor& prob, const Tensor& gt, double eps) { return dice_loss(Var(prob), gt, eps).value()[0]; }

double wbce_loss(const Tensor& prob, const Tensor& gt, const WeightMap& weights, double clamp) {
  return wbce_loss(Var(prob), gt, weights, clamp).value()[0];
}

double wiou_loss(const Tensor& prob, const Tensor& gt, const WeightMap& weights, double clamp) {
  return wiou_loss(Var(prob), gt, weights, clamp).value()[0];
}

Var frame_loss(const Var& prob, const Tensor& gt, const LossParams& params, FrameLoss* record) {
  const Tensor target = gt.reshaped(prob.shape());
  const WeightMap weights = weight_map(gt.rank() == 2 ? gt : gt.reshaped(Shape{prob.dim(-2), prob.dim(-1)}),
                                       params.kernel_size, params.lambda);
  Var dice = dice_loss(prob, target, params.dice_eps);
  Var wbce = wbce_loss(prob, target, weights, params.prob_clamp);
  Var wiou = wiou_loss(prob, target, weights, params.prob_clamp);
  if (record) *record = {dice.value()[0], wbce.value()[0], wiou.value()[0]};
  return ops::add(ops::add(dice, wbce), wiou);
}

LossResult total_loss(const std::vector<Var>& probs, const std::vector<Tensor>& gts, const LossParams& params) {
  if (probs.size() != 3 || gts.size() != 3) {
    throw ArityError("total_loss needs exactly 3 frames, got " + std::to_string(probs.size()) + " predictions and " +
                     std::to_string(gts.size()) + " masks");
  }
  LossResult result;
  result.breakdown.per_frame.resize(3);
  std::vector<Var> terms;
  for (int i = 0; i < 3; ++i) terms.push_back(frame_loss(probs[i], gts[i], params, &result.breakdown.per_frame[i]));
  result.total = ops::add(ops::add(terms[0], terms[1]), terms[2]);
  const auto& f = result.breakdown.per_frame;
  result.breakdown.total = (f[0].sum() + f[1].sum()) + f[2].sum();
  return result;
}

}  // namespace dsanet::objectives
