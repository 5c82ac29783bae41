#pragma once

#include <optional>

#include "seea/graph.hpp"
#include "seea/tensor.hpp"

namespace seea {

template <typename T>
struct FocalLossConfig {
  T gamma = T(2);
  T alpha = T(0.25);
  T epsilon_clip = T(1e-7);  // predictions are clipped to [eps, 1-eps] before logs
};

template <typename T>
struct JaccardConfig {
  T smooth = T(1e-5);
  // Unset: soft Jaccard on raw probabilities. Set (e.g. 0.5): inputs are
  // binarized at the threshold first.
  std::optional<T> threshold;
};

/// Mean over all elements of -alpha * (1 - p_t)^gamma * log(p_t) with
/// p_t = pred where target == 1 and 1 - pred where target == 0.
/// Differentiable with respect to pred; targets must be binary.
template <typename T>
Var<T> binary_focal_loss(const Var<T>& pred, const Tensor<T>& target,
                         const FocalLossConfig<T>& cfg = {});

/// (sum p*t + smooth) / (sum p + sum t - sum p*t + smooth).
template <typename T>
T jaccard(const Tensor<T>& pred, const Tensor<T>& target, const JaccardConfig<T>& cfg = {});

/// Streaming form of the same statistic, for dataset-level evaluation.
template <typename T>
struct JaccardAccumulator {
  double sum_pt = 0.0;
  double sum_p = 0.0;
  double sum_t = 0.0;

  void update(const Tensor<T>& pred, const Tensor<T>& target, std::optional<T> threshold);
  T value(T smooth) const {
    return static_cast<T>((sum_pt + static_cast<double>(smooth)) /
                          (sum_p + sum_t - sum_pt + static_cast<double>(smooth)));
  }
};

}  // namespace seea
