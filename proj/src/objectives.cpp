#include "seea/objectives.hpp"

#include <cmath>

namespace seea {

namespace {
template <typename T>
void require_binary(const Tensor<T>& target, const char* op) {
  const T* t = target.data();
  const size_t n = target.size();
  for (size_t i = 0; i < n; ++i) {
    const T v = t[i];
    if (!(std::abs(v) <= T(1e-6) || std::abs(v - T(1)) <= T(1e-6))) {
      throw ValueError(std::string(op) + ": target element " + std::to_string(i) + " = " +
                       std::to_string(static_cast<double>(v)) + " is not binary");
    }
  }
}
}  // namespace

template <typename T>
Var<T> binary_focal_loss(const Var<T>& pred, const Tensor<T>& target,
                         const FocalLossConfig<T>& cfg) {
  require_same_shape(pred.value(), target, "binary_focal_loss");
  require_binary(target, "binary_focal_loss");

  const T eps = cfg.epsilon_clip;
  const T lo = eps, hi = T(1) - eps;
  const size_t n = pred.value().size();
  const T* p = pred.value().data();
  const T* t = target.data();

  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const T pc = std::min(hi, std::max(lo, p[i]));
    const T pt = t[i] > T(0.5) ? pc : T(1) - pc;
    acc += static_cast<double>(cfg.alpha) * std::pow(1.0 - static_cast<double>(pt),
                                                     static_cast<double>(cfg.gamma)) *
           (-std::log(static_cast<double>(pt)));
  }
  const T loss = static_cast<T>(acc / static_cast<double>(n));

  auto tgt = std::make_shared<Tensor<T>>(target);
  return make_op<T>(
      "binary_focal_loss", Tensor<T>::scalar(loss), {pred}, [cfg, tgt, n](Node<T>& self) {
        auto& pn = *self.inputs[0];
        if (!pn.needs_grad) return;
        const T eps = cfg.epsilon_clip;
        const T lo = eps, hi = T(1) - eps;
        const T* p = pn.value.data();
        const T* t = tgt->data();
        const T upstream = self.grad[0] / static_cast<T>(n);
        Tensor<T> dp(pn.value.shape());
        for (size_t i = 0; i < n; ++i) {
          if (p[i] < lo || p[i] > hi) continue;  // clipped region: zero gradient
          const T pt = t[i] > T(0.5) ? p[i] : T(1) - p[i];
          const T q = T(1) - pt;
          // d/dp_t [ -alpha * q^gamma * log(p_t) ]
          //   = alpha * gamma * q^(gamma-1) * log(p_t) - alpha * q^gamma / p_t
          T d = -cfg.alpha * std::pow(q, cfg.gamma) / pt;
          if (cfg.gamma != T(0)) {
            d += cfg.alpha * cfg.gamma * std::pow(q, cfg.gamma - T(1)) * std::log(pt);
          }
          const T dpt_dp = t[i] > T(0.5) ? T(1) : T(-1);
          dp[i] = upstream * d * dpt_dp;
        }
        pn.accumulate(dp);
      });
}

template <typename T>
void JaccardAccumulator<T>::update(const Tensor<T>& pred, const Tensor<T>& target,
                                   std::optional<T> threshold) {
  require_same_shape(pred, target, "jaccard");
  const T* p = pred.data();
  const T* t = target.data();
  const size_t n = pred.size();
  if (threshold) {
    const T th = *threshold;
    for (size_t i = 0; i < n; ++i) {
      const double pb = p[i] > th ? 1.0 : 0.0;
      const double tb = t[i] > th ? 1.0 : 0.0;
      sum_pt += pb * tb;
      sum_p += pb;
      sum_t += tb;
    }
  } else {
    for (size_t i = 0; i < n; ++i) {
      sum_pt += static_cast<double>(p[i]) * static_cast<double>(t[i]);
      sum_p += static_cast<double>(p[i]);
      sum_t += static_cast<double>(t[i]);
    }
  }
}

template <typename T>
T jaccard(const Tensor<T>& pred, const Tensor<T>& target, const JaccardConfig<T>& cfg) {
  JaccardAccumulator<T> acc;
  acc.update(pred, target, cfg.threshold);
  return acc.value(cfg.smooth);
}

template Var<float> binary_focal_loss<float>(const Var<float>&, const Tensor<float>&,
                                             const FocalLossConfig<float>&);
template Var<double> binary_focal_loss<double>(const Var<double>&, const Tensor<double>&,
                                               const FocalLossConfig<double>&);
template float jaccard<float>(const Tensor<float>&, const Tensor<float>&,
                              const JaccardConfig<float>&);
template double jaccard<double>(const Tensor<double>&, const Tensor<double>&,
                                const JaccardConfig<double>&);
template struct JaccardAccumulator<float>;
template struct JaccardAccumulator<double>;

}  // namespace seea
