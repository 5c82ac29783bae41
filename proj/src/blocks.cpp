#include "seea/blocks.hpp"

namespace seea {

template <typename T>
Var<T> batchnorm(const Var<T>& x, const BatchNormParams<T>& p, Mode mode) {
  return batchnorm2d(x, p.gamma, p.beta, *p.running_mean, *p.running_var, mode,
                     static_cast<T>(kBnMomentum), static_cast<T>(kBnEpsilon));
}

template <typename T>
Var<T> conv_block(const Var<T>& x, const ConvBlockParams<T>& p, Mode mode) {
  Var<T> h = conv2d(x, p.conv1.w, p.conv1.b, 1, Padding::kSame);
  h = relu(batchnorm(h, p.bn1, mode));
  h = conv2d(h, p.conv2.w, p.conv2.b, 1, Padding::kSame);
  return relu(batchnorm(h, p.bn2, mode));
}

template <typename T>
Var<T> se_block(const Var<T>& x, const SeBlockParams<T>& p, Mode /*mode*/) {
  const int N = x.value().dim(0);
  const int C = x.value().dim(1);
  Var<T> s = reshape(global_avg_pool(x), {N, C});
  s = relu(dense(s, p.fc1_w, p.fc1_b));
  s = sigmoid(dense(s, p.fc2_w, p.fc2_b));
  return scale_channels(x, reshape(s, {N, C, 1, 1}));
}

template <typename T>
Var<T> gating_signal(const Var<T>& d, const GatingSignalParams<T>& p, Mode mode) {
  Var<T> h = conv2d(d, p.conv.w, p.conv.b, 1, Padding::kSame);
  return relu(batchnorm(h, p.bn, mode));
}

template <typename T>
Var<T> attention_gate(const Var<T>& x_skip, const Var<T>& g, const AttentionGateParams<T>& p,
                      Mode mode, Var<T>* alpha_out) {
  const auto& xs = x_skip.value().shape();
  const auto& gs = g.value().shape();
  if (xs.size() != 4 || gs.size() != 4 || xs[2] != 2 * gs[2] || xs[3] != 2 * gs[3] ||
      xs[0] != gs[0]) {
    throw ShapeError("attention_gate: skip " + shape_str(xs) +
                     " must be one pooling level above gating signal " + shape_str(gs));
  }
  Var<T> xa = conv2d(x_skip, p.wx.w, p.wx.b, 2, Padding::kValid);
  Var<T> ga = conv2d(g, p.wg.w, p.wg.b, 1, Padding::kValid);
  Var<T> q = relu(add(xa, ga));
  Var<T> pre = conv2d(q, p.psi.w, p.psi.b, 1, Padding::kValid);
  Var<T> alpha = sigmoid(batchnorm(pre, p.psi_bn, mode));
  Var<T> alpha_up = upsample2d(alpha, 2);
  if (alpha_out) *alpha_out = alpha_up;
  return scale_spatial(x_skip, alpha_up);
}

template <typename T>
Var<T> residual_conv_block(const Var<T>& x, const ResidualConvBlockParams<T>& p, Mode mode) {
  Var<T> main = conv_block(x, p.body, mode);
  Var<T> sc = p.shortcut ? conv2d(x, p.shortcut->w, p.shortcut->b, 1, Padding::kSame) : x;
  return relu(add(main, sc));
}

#define SEEA_INSTANTIATE_BLOCKS(T)                                                             \
  template Var<T> batchnorm<T>(const Var<T>&, const BatchNormParams<T>&, Mode);                \
  template Var<T> conv_block<T>(const Var<T>&, const ConvBlockParams<T>&, Mode);               \
  template Var<T> se_block<T>(const Var<T>&, const SeBlockParams<T>&, Mode);                   \
  template Var<T> gating_signal<T>(const Var<T>&, const GatingSignalParams<T>&, Mode);         \
  template Var<T> attention_gate<T>(const Var<T>&, const Var<T>&, const AttentionGateParams<T>&, \
                                    Mode, Var<T>*);                                            \
  template Var<T> residual_conv_block<T>(const Var<T>&, const ResidualConvBlockParams<T>&, Mode);

SEEA_INSTANTIATE_BLOCKS(float)
SEEA_INSTANTIATE_BLOCKS(double)

#undef SEEA_INSTANTIATE_BLOCKS

}  // namespace seea
