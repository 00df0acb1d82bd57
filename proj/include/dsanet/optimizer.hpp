#pragma once

#include <vector>

#include "dsanet/parameters.hpp"

namespace dsanet {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;  // L2 term added to the gradient
};

// Adam with coupled L2 weight decay. Parameters without a gradient this
// step are skipped.
class Adam {
 public:
  Adam(ParameterStore& params, AdamOptions options);

  void step();
  void zero_grad() { params_.zero_grad(); }
  long steps() const { return step_; }
  const AdamOptions& options() const { return options_; }

 private:
  ParameterStore& params_;
  AdamOptions options_;
  std::vector<Tensor> m_, v_;
  long step_ = 0;
};

}  // namespace dsanet
