#include "xsdepth/autograd.hpp"

#include <unordered_set>

namespace xsdepth {

Var constant(Tensor value) {
  auto n = std::make_shared<VarNode>();
  n->value = std::move(value);
  n->requires_grad = false;
  return n;
}

Var parameter(Tensor value) {
  auto n = std::make_shared<VarNode>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->is_leaf = true;
  return n;
}

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(VarNode&)> backward_fn) {
  auto n = std::make_shared<VarNode>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const Var& p : n->parents) {
    if (p && p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return n;
}

namespace {

// Iterative post-order DFS; recursion would overflow on deep training graphs.
void topo_sort(const Var& root, std::vector<VarNode*>& order) {
  std::unordered_set<VarNode*> visited;
  std::vector<std::pair<VarNode*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      VarNode* p = node->parents[next_child].get();
      ++next_child;
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

void backward(const Var& root, bool accumulate) {
  XS_REQUIRE(root != nullptr, "backward: null root");
  XS_REQUIRE(root->value.numel() == 1, "backward: root must be a scalar");
  if (!root->requires_grad) return;

  std::vector<VarNode*> order;
  topo_sort(root, order);

  // Interior grads are scratch for this call and always reset; leaf grads are
  // kept when accumulating across backward passes.
  for (VarNode* n : order) {
    n->ensure_grad();
    if (!n->is_leaf || !accumulate) n->zero_grad();
  }

  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    VarNode* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace xsdepth
