#pragma once

#include "seea/graph.hpp"
#include "seea/tensor.hpp"

namespace seea {

enum class Padding { kSame, kValid };
enum class Mode { kTrain, kInfer };

/// Output spatial size of a convolution/pool window sweep.
inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline int conv_pad(Padding p, int k) { return p == Padding::kSame ? (k - 1) / 2 : 0; }

// -- convolution -------------------------------------------------------------

/// Cross-correlation of x[N,Cin,H,W] with w[Cout,Cin,kh,kw] plus bias[Cout].
/// `same` padding with stride 1 preserves H,W (odd kernels).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride = 1,
              Padding padding = Padding::kSame);

/// Reference sliding-window convolution. Accumulates in the same (cin, kh,
/// kw) order as the im2col/GEMM path, so the two agree bitwise. Test oracle
/// and equivalence target; never used by the layers.
template <typename T>
Tensor<T> conv2d_naive(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride = 1,
                       Padding padding = Padding::kSame);

// -- pooling / resampling -----------------------------------------------------

/// Per-window max; odd trailing rows/columns are truncated. Backward routes
/// the gradient to the first row-major argmax of each window.
template <typename T>
Var<T> maxpool2d(const Var<T>& x, int k = 2, int stride = 2);

/// Per-channel spatial mean: [N,C,H,W] -> [N,C,1,1].
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);

/// Nearest-neighbour upsampling by an integer factor.
template <typename T>
Var<T> upsample2d(const Var<T>& x, int factor = 2);

// -- normalization ------------------------------------------------------------

/// Batch normalization over (N,H,W) per channel. Train mode uses batch
/// statistics (biased variance) and updates the running stats in place:
///   running += momentum * (batch - running)
/// Infer mode uses the running stats and requires them to be initialized
/// (length C).
template <typename T>
Var<T> batchnorm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                   Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode,
                   T momentum = T(0.1), T epsilon = T(1e-5));

// -- dense / activations ------------------------------------------------------

/// Affine map: x[N,F] * w[F,G] + b[G].
template <typename T>
Var<T> dense(const Var<T>& x, const Var<T>& w, const Var<T>& b);

/// max(0, x); the subgradient at exactly 0 is 0.
template <typename T>
Var<T> relu(const Var<T>& x);

template <typename T>
Var<T> sigmoid(const Var<T>& x);

// -- structural ---------------------------------------------------------------

/// Concatenate along the channel axis; N,H,W must match.
template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

// -- elementwise --------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

/// x[N,C,H,W] scaled per channel by s[N,C,1,1] (broadcast over H,W).
template <typename T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& s);

/// x[N,C,H,W] scaled per position by a[N,1,H,W] (broadcast over C).
template <typename T>
Var<T> scale_spatial(const Var<T>& x, const Var<T>& a);

// -- reductions ---------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& x);

template <typename T>
Var<T> mean_all(const Var<T>& x);

/// dot(x, weights) as a scalar node; weights are constant. Used to reduce an
/// arbitrary op output to a scalar for gradient checking.
template <typename T>
Var<T> weighted_sum(const Var<T>& x, Tensor<T> weights);

// -- kink probe ---------------------------------------------------------------

/// Minimum distance of relu inputs from 0 and of maxpool window runner-ups
/// from the max, recorded during forward passes while enabled. Lets the
/// gradient-check harness verify its random inputs sit on smooth regions.
struct KinkProbe {
  static void enable();
  static void disable();
  static void reset();
  static double min_margin();
};

}  // namespace seea
