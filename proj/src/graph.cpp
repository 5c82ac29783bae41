#include "seea/graph.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

namespace seea {

int64_t next_node_id() {
  // Graph construction is single-threaded per model instance; the counter is
  // thread-local so parallel instances cannot interleave ids.
  thread_local int64_t counter = 0;
  return ++counter;
}

template <typename T>
void backward(const Var<T>& loss) {
  if (!loss.defined()) throw ValueError("backward: undefined loss node");
  if (loss.value().size() != 1) {
    throw ValueError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }

  // Collect the reachable subgraph.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{loss.node().get()};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& in : n->inputs) {
      if (seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  // Descending creation order is a valid reverse-topological order.
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });

  loss.node()->accumulate(Tensor<T>::full(loss.shape(), T(1)));
  for (Node<T>* n : order) {
    if (n->backward_fn && n->needs_grad && n->has_grad()) {
      n->backward_fn(*n);
    }
  }
}

template void backward<float>(const Var<float>&);
template void backward<double>(const Var<double>&);

}  // namespace seea
