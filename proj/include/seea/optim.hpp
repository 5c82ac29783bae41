#pragma once

#include <cstdint>
#include <vector>

#include "seea/params.hpp"
#include "seea/tensor.hpp"

namespace seea {

template <typename T>
struct AdamConfig {
  T lr = T(0.01);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-7);
};

/// Bias-corrected Adam over a ParameterStore. Moment tensors exist only for
/// trainable entries; non-trainable entries (batch-norm running statistics)
/// are never touched.
template <typename T>
class Adam {
public:
  Adam(const ParameterStore<T>& store, AdamConfig<T> cfg);

  /// One update. `grads` is indexed like the store; entries may be empty
  /// (parameter unused in this step) and are treated as zero gradient.
  void step(ParameterStore<T>& store, const std::vector<Tensor<T>>& grads);

  int64_t step_count() const { return step_; }
  const AdamConfig<T>& config() const { return cfg_; }

private:
  AdamConfig<T> cfg_;
  int64_t step_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace seea
