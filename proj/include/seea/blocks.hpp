#pragma once

#include <optional>

#include "seea/ops.hpp"

namespace seea {

// Normalization constants shared by every batch-norm in the networks.
inline constexpr double kBnMomentum = 0.1;
inline constexpr double kBnEpsilon = 1e-5;

template <typename T>
struct Conv2dParams {
  Var<T> w;  // [Cout, Cin, kh, kw]
  Var<T> b;  // [Cout]
};

template <typename T>
struct BatchNormParams {
  Var<T> gamma;
  Var<T> beta;
  Tensor<T>* running_mean = nullptr;  // owned by the ParameterStore
  Tensor<T>* running_var = nullptr;
};

/// conv3x3 -> BN -> relu -> conv3x3 -> BN -> relu, spatial size preserved.
template <typename T>
struct ConvBlockParams {
  Conv2dParams<T> conv1, conv2;
  BatchNormParams<T> bn1, bn2;
};

/// GAP -> fc(C -> C/r) -> relu -> fc(C/r -> C) -> sigmoid -> channel scaling.
template <typename T>
struct SeBlockParams {
  Var<T> fc1_w, fc1_b;  // [C, C/r], [C/r]
  Var<T> fc2_w, fc2_b;  // [C/r, C], [C]
  int reduction = 16;
};

/// 1x1 conv -> BN -> relu; projects decoder features to the gate's width.
template <typename T>
struct GatingSignalParams {
  Conv2dParams<T> conv;
  BatchNormParams<T> bn;
};

/// Wx: strided 1x1 conv on the skip signal; Wg: 1x1 conv on the gating
/// signal; psi: 1x1 conv to one channel followed by BN. Both projections
/// share the intermediate width F_int.
template <typename T>
struct AttentionGateParams {
  Conv2dParams<T> wx;   // stride 2, C -> F_int
  Conv2dParams<T> wg;   // Cg -> F_int
  Conv2dParams<T> psi;  // F_int -> 1
  BatchNormParams<T> psi_bn;
};

/// conv_block plus a shortcut (identity when channels match, else 1x1 conv),
/// relu after the addition.
template <typename T>
struct ResidualConvBlockParams {
  ConvBlockParams<T> body;
  std::optional<Conv2dParams<T>> shortcut;
};

template <typename T>
Var<T> batchnorm(const Var<T>& x, const BatchNormParams<T>& p, Mode mode);

template <typename T>
Var<T> conv_block(const Var<T>& x, const ConvBlockParams<T>& p, Mode mode);

template <typename T>
Var<T> se_block(const Var<T>& x, const SeBlockParams<T>& p, Mode mode);

template <typename T>
Var<T> gating_signal(const Var<T>& d, const GatingSignalParams<T>& p, Mode mode);

/// x_skip must be exactly one pooling level finer than g (2x spatial size).
/// When alpha_out is given it receives the attention coefficients at the
/// skip resolution.
template <typename T>
Var<T> attention_gate(const Var<T>& x_skip, const Var<T>& g, const AttentionGateParams<T>& p,
                      Mode mode, Var<T>* alpha_out = nullptr);

template <typename T>
Var<T> residual_conv_block(const Var<T>& x, const ResidualConvBlockParams<T>& p, Mode mode);

}  // namespace seea
