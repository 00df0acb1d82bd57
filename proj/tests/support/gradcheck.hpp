#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dsanet/autograd.hpp"
#include "dsanet/rng.hpp"
#include "dsanet/tensor.hpp"

namespace dsanet::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, lo, hi);
  return t;
}

inline Tensor random_mask(Shape shape, Rng& rng, double p = 0.5) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform01(rng) < p ? 1.0 : 0.0;
  return t;
}

// ||a - n|| / max(||a||, ||n||), with 0 when both vanish.
inline double relative_error(const Tensor& analytic, const Tensor& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

// Central differences of the scalar `f` with respect to each input, compared
// with reverse-mode gradients. Returns the worst relative error.
inline double gradient_check(const std::function<Var(const std::vector<Var>&)>& f, std::vector<Tensor> inputs,
                             double step = 1e-5) {
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.emplace_back(t, true);
  Var out = f(vars);
  backward(out);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor numeric(inputs[k].shape());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Var> probe;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          Tensor t = inputs[j];
          if (j == k) t[i] += delta;
          probe.emplace_back(t, false);
        }
        return f(probe).value()[0];
      };
      numeric[i] = (eval(step) - eval(-step)) / (2.0 * step);
    }
    worst = std::max(worst, relative_error(vars[k].grad(), numeric));
  }
  return worst;
}

}  // namespace dsanet::testing
