#include "dsanet/optimizer.hpp"

#include <cmath>

#include "dsanet/errors.hpp"

namespace dsanet {

Adam::Adam(ParameterStore& params, AdamOptions options) : params_(params), options_(options) {
  if (!(options_.learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(options_.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  for (const auto& [name, v] : params_.entries()) {
    m_.emplace_back(v.shape());
    v_.emplace_back(v.shape());
  }
}

void Adam::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  std::size_t i = 0;
  for (const auto& [name, handle] : params_.entries()) {
    Var var = handle;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    ++i;
    if (!var.has_grad()) continue;
    const Tensor& g = var.node()->grad;
    Tensor& p = var.mutable_value();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double grad = g[k] + options_.weight_decay * p[k];
      m[k] = options_.beta1 * m[k] + (1.0 - options_.beta1) * grad;
      v[k] = options_.beta2 * v[k] + (1.0 - options_.beta2) * grad * grad;
      p[k] -= options_.learning_rate * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + options_.eps);
    }
  }
}

}  // namespace dsanet
