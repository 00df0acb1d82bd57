#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dsanet/autograd.hpp"
#include "dsanet/rng.hpp"

namespace dsanet {

// Named trainable tensors in registration order. The order is part of the
// checkpoint format and of the optimizer state layout.
class ParameterStore {
 public:
  Var add(const std::string& name, Tensor init);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t element_count() const;

  void zero_grad();

 private:
  std::vector<std::pair<std::string, Var>> entries_;
  std::map<std::string, std::size_t> index_;
};

// Symmetric uniform in +-gain / sqrt(fan_in). gain = sqrt(6) suits layers
// followed by ReLU, sqrt(3) gives unit-variance linear projections.
inline constexpr double kReluGain = 2.449489742783178;
inline constexpr double kLinearGain = 1.7320508075688772;
Tensor fan_in_uniform(Shape shape, int fan_in, Rng& rng, double gain = kReluGain);

}  // namespace dsanet
