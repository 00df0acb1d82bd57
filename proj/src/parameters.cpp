#include "dsanet/parameters.hpp"

#include <cmath>

#include "dsanet/errors.hpp"

namespace dsanet {

Var ParameterStore::add(const std::string& name, Tensor init) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  Var v(std::move(init), true);
  index_[name] = entries_.size();
  entries_.emplace_back(name, v);
  return v;
}

const Var& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw LookupError("unknown parameter " + name);
  return entries_[it->second].second;
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : entries_) n += v.value().size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, v] : entries_) v.zero_grad();
}

Tensor fan_in_uniform(Shape shape, int fan_in, Rng& rng, double gain) {
  Tensor t(std::move(shape));
  const double bound = gain / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace dsanet
