#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "seea/tensor.hpp"

namespace seea {

/// One record on the reverse-mode tape. Nodes are created in topological
/// order (a node's inputs always carry smaller ids), so backward() can walk
/// ids in descending order without an explicit sort key beyond the id.
template <typename T>
struct Node {
  using Ptr = std::shared_ptr<Node<T>>;

  int64_t id = 0;
  const char* op = "leaf";
  Tensor<T> value;
  Tensor<T> grad;  // empty until backward touches this node
  bool needs_grad = false;
  std::vector<Ptr> inputs;
  // Reads this->grad and accumulates into the inputs' grads.
  std::function<void(Node<T>&)> backward_fn;

  bool has_grad() const { return !grad.empty(); }

  /// grad += g, allocating zeros on first touch. Accumulation happens in
  /// deterministic tape order, so fan-out sums are reproducible bit for bit.
  void accumulate(const Tensor<T>& g) {
    if (!g.same_shape(value)) {
      throw ShapeError(std::string("grad shape ") + shape_str(g.shape()) +
                       " does not match value shape " + shape_str(value.shape()));
    }
    if (grad.empty()) {
      grad = Tensor<T>(value.shape());
    }
    T* dst = grad.data();
    const T* src = g.data();
    const size_t n = g.size();
    for (size_t i = 0; i < n; ++i) dst[i] += src[i];
  }
};

int64_t next_node_id();

/// Handle to a graph node. Copying shares the node.
template <typename T>
class Var {
public:
  Var() = default;
  explicit Var(typename Node<T>::Ptr n) : node_(std::move(n)) {}

  static Var leaf(Tensor<T> value, bool requires_grad) {
    auto n = std::make_shared<Node<T>>();
    n->id = next_node_id();
    n->value = std::move(value);
    n->needs_grad = requires_grad;
    return Var(std::move(n));
  }

  static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_ && node_->has_grad(); }
  bool needs_grad() const { return node_ && node_->needs_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  typename Node<T>::Ptr node() const { return node_; }

private:
  typename Node<T>::Ptr node_;
};

template <typename T>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> inputs,
               std::function<void(Node<T>&)> backward_fn) {
  debug_check_finite(value, op);
  auto n = std::make_shared<Node<T>>();
  n->id = next_node_id();
  n->op = op;
  n->value = std::move(value);
  n->inputs.reserve(inputs.size());
  for (auto& in : inputs) {
    n->needs_grad = n->needs_grad || in.needs_grad();
    n->inputs.push_back(in.node());
  }
  if (n->needs_grad) {
    n->backward_fn = std::move(backward_fn);
  }
  return Var<T>(std::move(n));
}

template <typename T>
inline bool any_needs_grad(std::initializer_list<const Var<T>*> vars) {
  for (const Var<T>* v : vars) {
    if (v->needs_grad()) return true;
  }
  return false;
}

/// Reverse sweep from a scalar loss. Gradients of fan-out nodes are summed
/// in tape order.
template <typename T>
void backward(const Var<T>& loss);

}  // namespace seea
