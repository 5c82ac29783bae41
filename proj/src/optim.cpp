#include "seea/optim.hpp"

#include <cmath>

namespace seea {

template <typename T>
Adam<T>::Adam(const ParameterStore<T>& store, AdamConfig<T> cfg) : cfg_(cfg) {
  m_.resize(store.size());
  v_.resize(store.size());
  for (size_t i = 0; i < store.size(); ++i) {
    if (store[i].trainable) {
      m_[i] = Tensor<T>(store[i].tensor.shape());
      v_[i] = Tensor<T>(store[i].tensor.shape());
    }
  }
}

template <typename T>
void Adam<T>::step(ParameterStore<T>& store, const std::vector<Tensor<T>>& grads) {
  if (grads.size() != store.size()) {
    throw ShapeError("adam_step: got " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(store.size()) + " parameters");
  }
  ++step_;
  const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(step_));
  const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(step_));
  for (size_t i = 0; i < store.size(); ++i) {
    if (!store[i].trainable) continue;
    Tensor<T>& p = store[i].tensor;
    Tensor<T>& m = m_[i];
    Tensor<T>& v = v_[i];
    const bool has_grad = !grads[i].empty();
    if (has_grad && !grads[i].same_shape(p)) {
      throw ShapeError("adam_step: gradient shape " + shape_str(grads[i].shape()) +
                       " does not match parameter " + store[i].name + " " +
                       shape_str(p.shape()));
    }
    const T* g = has_grad ? grads[i].data() : nullptr;
    const size_t n = p.size();
    for (size_t j = 0; j < n; ++j) {
      const T gj = g ? g[j] : T(0);
      m[j] = cfg_.beta1 * m[j] + (T(1) - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (T(1) - cfg_.beta2) * gj * gj;
      const T mhat = m[j] / bc1;
      const T vhat = v[j] / bc2;
      p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace seea
