#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dsanet/tensor.hpp"

namespace dsanet {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the reverse-mode tape. A node owns its forward value, its
// accumulated gradient and a closure that pushes that gradient into its
// parents. Leaves (parameters, inputs) have no closure.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;

  // Gradient buffer of parent i, allocated on first use; nullptr when that
  // parent does not take part in differentiation.
  Tensor* parent_grad(std::size_t i);
  const Tensor& parent_value(std::size_t i) const { return parents[i]->value; }
};

// Handle to a tape node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  // Records an op result. If grad recording is off or no parent requires a
  // gradient, the result is a constant leaf and `fn` is dropped.
  static Var from_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_->requires_grad; }

  // Zero tensor of the value's shape when no gradient has flowed yet.
  Tensor grad() const;
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad = Tensor(); }

  Node* node() const { return node_.get(); }
  const NodePtr& node_ptr() const { return node_; }

 private:
  NodePtr node_;
};

// Seeds d(root)/d(root) = 1 (root must hold one element) and runs the tape
// in reverse topological order.
void backward(const Var& root);

bool grad_enabled();

// Disables tape recording in the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace dsanet
