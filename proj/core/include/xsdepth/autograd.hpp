#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "xsdepth/tensor.hpp"

namespace xsdepth {

// Reverse-mode automatic differentiation over Tensors.
//
// Every operation builds a node in a dynamic DAG. backward() seeds the root
// (a scalar) with gradient 1 and walks the graph in reverse topological
// order. The graph is rebuilt per forward pass; nodes hold their parents via
// shared_ptr so a step's graph is released when the root goes out of scope.
class VarNode;
using Var = std::shared_ptr<VarNode>;

class VarNode {
 public:
  Tensor value;
  Tensor grad;  // allocated lazily by backward()
  bool requires_grad = false;
  bool is_leaf = false;
  std::vector<Var> parents;
  // Propagates this->grad into parents' grads. Null for leaves/constants.
  std::function<void(VarNode&)> backward_fn;

  const std::vector<long>& shape() const { return value.shape(); }
  void ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor::zeros(value.shape());
  }
  void zero_grad() {
    if (grad.numel() == value.numel())
      std::fill(grad.data(), grad.data() + grad.numel(), 0.0);
  }
};

// Non-differentiable input (images, targets).
Var constant(Tensor value);
// Trainable parameter; receives gradients and is visible to optimizers.
Var parameter(Tensor value);
// Interior node helper used by op implementations.
Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(VarNode&)> backward_fn);

// Runs reverse-mode accumulation from a scalar root. Gradients of all
// reachable requires_grad nodes are accumulated into their .grad tensors
// (zeroed first unless accumulate=true).
void backward(const Var& root, bool accumulate = false);

}  // namespace xsdepth
