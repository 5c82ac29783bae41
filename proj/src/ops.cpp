#include "seea/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "seea/gemm.hpp"

namespace seea {

// ---------------------------------------------------------------------------
// kink probe
// ---------------------------------------------------------------------------

namespace {
struct KinkProbeState {
  bool enabled = false;
  double min_margin = std::numeric_limits<double>::infinity();
};
KinkProbeState& probe_state() {
  thread_local KinkProbeState s;
  return s;
}
void probe_margin(double m) {
  auto& s = probe_state();
  if (s.enabled && m < s.min_margin) s.min_margin = m;
}
}  // namespace

void KinkProbe::enable() { probe_state().enabled = true; }
void KinkProbe::disable() { probe_state().enabled = false; }
void KinkProbe::reset() { probe_state().min_margin = std::numeric_limits<double>::infinity(); }
double KinkProbe::min_margin() { return probe_state().min_margin; }

// ---------------------------------------------------------------------------
// im2col
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void require_4d(const Tensor<T>& t, const char* op, const char* what) {
  if (t.ndim() != 4) {
    throw ShapeError(std::string(op) + ": " + what + " must be 4-d, got shape " +
                     shape_str(t.shape()));
  }
}

// Column layout: row index k = (cin * kh + r) * kw + s, column index p =
// oh * Wo + ow. The k order matches the naive oracle's accumulation order.
template <typename T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride, int ph, int pw, int Ho,
            int Wo, T* col) {
  const int P = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    const T* xc = x + static_cast<size_t>(c) * H * W;
    for (int r = 0; r < kh; ++r) {
      for (int s = 0; s < kw; ++s) {
        T* dst = col + (static_cast<size_t>(c) * kh * kw + r * kw + s) * P;
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * stride + r - ph;
          if (ih < 0 || ih >= H) {
            std::memset(dst + static_cast<size_t>(oh) * Wo, 0, sizeof(T) * Wo);
            continue;
          }
          const T* src = xc + static_cast<size_t>(ih) * W;
          T* d = dst + static_cast<size_t>(oh) * Wo;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * stride + s - pw;
            d[ow] = (iw >= 0 && iw < W) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int C, int H, int W, int kh, int kw, int stride, int ph, int pw, int Ho,
            int Wo, T* x) {
  const int P = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    T* xc = x + static_cast<size_t>(c) * H * W;
    for (int r = 0; r < kh; ++r) {
      for (int s = 0; s < kw; ++s) {
        const T* src = col + (static_cast<size_t>(c) * kh * kw + r * kw + s) * P;
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * stride + r - ph;
          if (ih < 0 || ih >= H) continue;
          T* d = xc + static_cast<size_t>(ih) * W;
          const T* srow = src + static_cast<size_t>(oh) * Wo;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * stride + s - pw;
            if (iw >= 0 && iw < W) d[iw] += srow[ow];
          }
        }
      }
    }
  }
}

struct ConvGeom {
  int N, Cin, H, W, Cout, kh, kw, stride, ph, pw, Ho, Wo;
};

template <typename T>
ConvGeom conv_geometry(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                       Padding padding) {
  require_4d(x, "conv2d", "input");
  require_4d(w, "conv2d", "weight");
  if (x.dim(1) != w.dim(1)) {
    throw ShapeError("conv2d: input channels of " + shape_str(x.shape()) +
                     " do not match weight " + shape_str(w.shape()));
  }
  if (b.ndim() != 1 || b.dim(0) != w.dim(0)) {
    throw ShapeError("conv2d: bias " + shape_str(b.shape()) + " does not match weight " +
                     shape_str(w.shape()));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  ConvGeom g;
  g.N = x.dim(0);
  g.Cin = x.dim(1);
  g.H = x.dim(2);
  g.W = x.dim(3);
  g.Cout = w.dim(0);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  g.stride = stride;
  g.ph = conv_pad(padding, g.kh);
  g.pw = conv_pad(padding, g.kw);
  if (g.kh > g.H + 2 * g.ph || g.kw > g.W + 2 * g.pw) {
    throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " larger than padded input " +
                     shape_str(x.shape()));
  }
  g.Ho = conv_out_dim(g.H, g.kh, stride, g.ph);
  g.Wo = conv_out_dim(g.W, g.kw, stride, g.pw);
  return g;
}

}  // namespace

template <typename T>
Tensor<T> conv2d_naive(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                       Padding padding) {
  const ConvGeom g = conv_geometry(x, w, b, stride, padding);
  Tensor<T> out({g.N, g.Cout, g.Ho, g.Wo});
  for (int n = 0; n < g.N; ++n) {
    for (int co = 0; co < g.Cout; ++co) {
      for (int oh = 0; oh < g.Ho; ++oh) {
        for (int ow = 0; ow < g.Wo; ++ow) {
          T acc = T(0);
          for (int ci = 0; ci < g.Cin; ++ci) {
            for (int r = 0; r < g.kh; ++r) {
              const int ih = oh * g.stride + r - g.ph;
              for (int s = 0; s < g.kw; ++s) {
                const int iw = ow * g.stride + s - g.pw;
                if (ih >= 0 && ih < g.H && iw >= 0 && iw < g.W) {
                  acc += x.at4(n, ci, ih, iw) * w.at4(co, ci, r, s);
                }
              }
            }
          }
          out.at4(n, co, oh, ow) = acc + b[co];
        }
      }
    }
  }
  return out;
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, Padding padding) {
  const ConvGeom g = conv_geometry(x.value(), w.value(), b.value(), stride, padding);
  const int K = g.Cin * g.kh * g.kw;
  const int P = g.Ho * g.Wo;

  Tensor<T> out({g.N, g.Cout, g.Ho, g.Wo});
  {
    std::vector<T> col(static_cast<size_t>(K) * P);
    const T* xd = x.value().data();
    const T* wd = w.value().data();
    const T* bd = b.value().data();
    for (int n = 0; n < g.N; ++n) {
      im2col(xd + static_cast<size_t>(n) * g.Cin * g.H * g.W, g.Cin, g.H, g.W, g.kh, g.kw,
             g.stride, g.ph, g.pw, g.Ho, g.Wo, col.data());
      T* on = out.data() + static_cast<size_t>(n) * g.Cout * P;
      gemm_nn(g.Cout, P, K, wd, col.data(), on, false);
      for (int co = 0; co < g.Cout; ++co) {
        T* row = on + static_cast<size_t>(co) * P;
        const T bias = bd[co];
        for (int p = 0; p < P; ++p) row[p] += bias;
      }
    }
  }

  return make_op<T>("conv2d", std::move(out), {x, w, b}, [g, K, P](Node<T>& self) {
    const Tensor<T>& gout = self.grad;
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    auto& bn = *self.inputs[2];
    const T* gd = gout.data();

    if (bn.needs_grad) {
      Tensor<T> db(bn.value.shape());
      for (int n = 0; n < g.N; ++n) {
        for (int co = 0; co < g.Cout; ++co) {
          const T* row = gd + (static_cast<size_t>(n) * g.Cout + co) * P;
          T acc = T(0);
          for (int p = 0; p < P; ++p) acc += row[p];
          db[co] += acc;
        }
      }
      bn.accumulate(db);
    }

    const bool want_w = wn.needs_grad;
    const bool want_x = xn.needs_grad;
    if (!want_w && !want_x) return;

    std::vector<T> col(static_cast<size_t>(K) * P);
    Tensor<T> dw(wn.value.shape());
    Tensor<T> dx(xn.value.shape());
    std::vector<T> dcol(want_x ? static_cast<size_t>(K) * P : 0);
    const T* xd = xn.value.data();
    const T* wd = wn.value.data();
    for (int n = 0; n < g.N; ++n) {
      const T* gn = gd + static_cast<size_t>(n) * g.Cout * P;
      if (want_w) {
        im2col(xd + static_cast<size_t>(n) * g.Cin * g.H * g.W, g.Cin, g.H, g.W, g.kh, g.kw,
               g.stride, g.ph, g.pw, g.Ho, g.Wo, col.data());
        gemm_nt(g.Cout, K, P, gn, col.data(), dw.data(), true);
      }
      if (want_x) {
        gemm_tn(K, P, g.Cout, wd, gn, dcol.data(), false);
        col2im(dcol.data(), g.Cin, g.H, g.W, g.kh, g.kw, g.stride, g.ph, g.pw, g.Ho, g.Wo,
               dx.data() + static_cast<size_t>(n) * g.Cin * g.H * g.W);
      }
    }
    if (want_w) wn.accumulate(dw);
    if (want_x) xn.accumulate(dx);
  });
}

// ---------------------------------------------------------------------------
// pooling / resampling
// ---------------------------------------------------------------------------

template <typename T>
Var<T> maxpool2d(const Var<T>& x, int k, int stride) {
  require_4d(x.value(), "maxpool2d", "input");
  const int N = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2),
            W = x.value().dim(3);
  if (k > H || k > W) {
    throw ShapeError("maxpool2d: window " + std::to_string(k) + " exceeds input " +
                     shape_str(x.value().shape()));
  }
  if (stride < 1) throw ShapeError("maxpool2d: stride must be >= 1");
  const int Ho = (H - k) / stride + 1;
  const int Wo = (W - k) / stride + 1;

  Tensor<T> out({N, C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<int32_t>>(out.size());
  const T* xd = x.value().data();
  const bool probing = probe_state().enabled;
  size_t o = 0;
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* plane = xd + (static_cast<size_t>(n) * C + c) * H * W;
      for (int oh = 0; oh < Ho; ++oh) {
        for (int ow = 0; ow < Wo; ++ow, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          T second = -std::numeric_limits<T>::infinity();
          int32_t best_idx = 0;
          for (int r = 0; r < k; ++r) {
            const int ih = oh * stride + r;
            for (int s = 0; s < k; ++s) {
              const int iw = ow * stride + s;
              const T v = plane[static_cast<size_t>(ih) * W + iw];
              if (v > best) {
                second = best;
                best = v;
                best_idx = static_cast<int32_t>(ih * W + iw);
              } else if (v > second) {
                second = v;
              }
            }
          }
          out[o] = best;
          (*argmax)[o] = best_idx;
          if (probing && k > 1) probe_margin(static_cast<double>(best - second));
        }
      }
    }
  }

  return make_op<T>("maxpool2d", std::move(out), {x},
                    [N, C, H, W, Ho, Wo, argmax](Node<T>& self) {
                      auto& xn = *self.inputs[0];
                      if (!xn.needs_grad) return;
                      Tensor<T> dx(xn.value.shape());
                      const T* gd = self.grad.data();
                      size_t o = 0;
                      for (int n = 0; n < N; ++n) {
                        for (int c = 0; c < C; ++c) {
                          T* plane = dx.data() + (static_cast<size_t>(n) * C + c) * H * W;
                          for (int p = 0; p < Ho * Wo; ++p, ++o) {
                            plane[(*argmax)[o]] += gd[o];
                          }
                        }
                      }
                      xn.accumulate(dx);
                    });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  require_4d(x.value(), "global_avg_pool", "input");
  const int N = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2),
            W = x.value().dim(3);
  if (H < 1 || W < 1) {
    throw ShapeError("global_avg_pool: empty spatial extent " + shape_str(x.value().shape()));
  }
  Tensor<T> out({N, C, 1, 1});
  const T* xd = x.value().data();
  const size_t hw = static_cast<size_t>(H) * W;
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* plane = xd + (static_cast<size_t>(n) * C + c) * hw;
      double acc = 0.0;
      for (size_t i = 0; i < hw; ++i) acc += static_cast<double>(plane[i]);
      out[static_cast<size_t>(n) * C + c] = static_cast<T>(acc / static_cast<double>(hw));
    }
  }
  return make_op<T>("global_avg_pool", std::move(out), {x}, [N, C, hw](Node<T>& self) {
    auto& xn = *self.inputs[0];
    if (!xn.needs_grad) return;
    Tensor<T> dx(xn.value.shape());
    const T* gd = self.grad.data();
    const T inv = T(1) / static_cast<T>(hw);
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const T g = gd[static_cast<size_t>(n) * C + c] * inv;
        T* plane = dx.data() + (static_cast<size_t>(n) * C + c) * hw;
        for (size_t i = 0; i < hw; ++i) plane[i] = g;
      }
    }
    xn.accumulate(dx);
  });
}

template <typename T>
Var<T> upsample2d(const Var<T>& x, int factor) {
  require_4d(x.value(), "upsample2d", "input");
  if (factor < 1) throw ShapeError("upsample2d: factor must be >= 1");
  const int N = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2),
            W = x.value().dim(3);
  const int Ho = H * factor, Wo = W * factor;
  Tensor<T> out({N, C, Ho, Wo});
  const T* xd = x.value().data();
  T* od = out.data();
  for (size_t nc = 0; nc < static_cast<size_t>(N) * C; ++nc) {
    const T* src = xd + nc * H * W;
    T* dst = od + nc * Ho * Wo;
    for (int oh = 0; oh < Ho; ++oh) {
      const T* srow = src + static_cast<size_t>(oh / factor) * W;
      T* drow = dst + static_cast<size_t>(oh) * Wo;
      for (int ow = 0; ow < Wo; ++ow) drow[ow] = srow[ow / factor];
    }
  }
  return make_op<T>("upsample2d", std::move(out), {x}, [N, C, H, W, factor](Node<T>& self) {
    auto& xn = *self.inputs[0];
    if (!xn.needs_grad) return;
    const int Ho = H * factor, Wo = W * factor;
    Tensor<T> dx(xn.value.shape());
    const T* gd = self.grad.data();
    for (size_t nc = 0; nc < static_cast<size_t>(N) * C; ++nc) {
      const T* gsrc = gd + nc * Ho * Wo;
      T* dst = dx.data() + nc * H * W;
      for (int oh = 0; oh < Ho; ++oh) {
        T* drow = dst + static_cast<size_t>(oh / factor) * W;
        const T* grow = gsrc + static_cast<size_t>(oh) * Wo;
        for (int ow = 0; ow < Wo; ++ow) drow[ow / factor] += grow[ow];
      }
    }
    xn.accumulate(dx);
  });
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

template <typename T>
Var<T> batchnorm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                   Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode, T momentum,
                   T epsilon) {
  require_4d(x.value(), "batchnorm2d", "input");
  const int N = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2),
            W = x.value().dim(3);
  if (gamma.value().ndim() != 1 || gamma.value().dim(0) != C || beta.value().ndim() != 1 ||
      beta.value().dim(0) != C) {
    throw ShapeError("batchnorm2d: gamma " + shape_str(gamma.value().shape()) + " / beta " +
                     shape_str(beta.value().shape()) + " must both have shape (" +
                     std::to_string(C) + ")");
  }
  if (running_mean.size() != static_cast<size_t>(C) ||
      running_var.size() != static_cast<size_t>(C)) {
    if (mode == Mode::kInfer) {
      throw ValueError("batchnorm2d: inference requested with uninitialized running statistics "
                       "(expected length " +
                       std::to_string(C) + ")");
    }
    throw ShapeError("batchnorm2d: running statistics must have length " + std::to_string(C));
  }

  const size_t hw = static_cast<size_t>(H) * W;
  const size_t m = static_cast<size_t>(N) * hw;
  std::vector<T> mean(C), inv_std(C);

  if (mode == Mode::kTrain) {
    std::vector<T> var(C);
    const T* xd = x.value().data();
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int n = 0; n < N; ++n) {
        const T* plane = xd + (static_cast<size_t>(n) * C + c) * hw;
        for (size_t i = 0; i < hw; ++i) acc += static_cast<double>(plane[i]);
      }
      const double mu = acc / static_cast<double>(m);
      double vacc = 0.0;
      for (int n = 0; n < N; ++n) {
        const T* plane = xd + (static_cast<size_t>(n) * C + c) * hw;
        for (size_t i = 0; i < hw; ++i) {
          const double d = static_cast<double>(plane[i]) - mu;
          vacc += d * d;
        }
      }
      mean[c] = static_cast<T>(mu);
      var[c] = static_cast<T>(vacc / static_cast<double>(m));
      inv_std[c] = T(1) / std::sqrt(var[c] + epsilon);
    }
    for (int c = 0; c < C; ++c) {
      running_mean[c] += momentum * (mean[c] - running_mean[c]);
      running_var[c] += momentum * (var[c] - running_var[c]);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = running_mean[c];
      inv_std[c] = T(1) / std::sqrt(running_var[c] + epsilon);
    }
  }

  auto xhat = std::make_shared<Tensor<T>>(x.value().shape());
  Tensor<T> out(x.value().shape());
  {
    const T* xd = x.value().data();
    const T* gm = gamma.value().data();
    const T* bt = beta.value().data();
    T* xh = xhat->data();
    T* od = out.data();
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const size_t base = (static_cast<size_t>(n) * C + c) * hw;
        const T mu = mean[c], is = inv_std[c], g = gm[c], b = bt[c];
        for (size_t i = 0; i < hw; ++i) {
          const T h = (xd[base + i] - mu) * is;
          xh[base + i] = h;
          od[base + i] = g * h + b;
        }
      }
    }
  }

  auto inv_std_cap = std::make_shared<std::vector<T>>(std::move(inv_std));
  return make_op<T>(
      "batchnorm2d", std::move(out), {x, gamma, beta},
      [N, C, hw, m, mode, xhat, inv_std_cap](Node<T>& self) {
        auto& xn = *self.inputs[0];
        auto& gn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        const T* gd = self.grad.data();
        const T* xh = xhat->data();

        std::vector<T> sum_g(C, T(0)), sum_gx(C, T(0));
        for (int n = 0; n < N; ++n) {
          for (int c = 0; c < C; ++c) {
            const size_t base = (static_cast<size_t>(n) * C + c) * hw;
            double sg = 0.0, sgx = 0.0;
            for (size_t i = 0; i < hw; ++i) {
              sg += static_cast<double>(gd[base + i]);
              sgx += static_cast<double>(gd[base + i]) * static_cast<double>(xh[base + i]);
            }
            sum_g[c] += static_cast<T>(sg);
            sum_gx[c] += static_cast<T>(sgx);
          }
        }
        if (gn.needs_grad) {
          gn.accumulate(Tensor<T>(gn.value.shape(), sum_gx));
        }
        if (bn.needs_grad) {
          bn.accumulate(Tensor<T>(bn.value.shape(), sum_g));
        }
        if (xn.needs_grad) {
          Tensor<T> dx(xn.value.shape());
          const T* gm = gn.value.data();
          const T inv_m = T(1) / static_cast<T>(m);
          for (int n = 0; n < N; ++n) {
            for (int c = 0; c < C; ++c) {
              const size_t base = (static_cast<size_t>(n) * C + c) * hw;
              const T scale = gm[c] * (*inv_std_cap)[c];
              if (mode == Mode::kTrain) {
                const T mg = sum_g[c] * inv_m;
                const T mgx = sum_gx[c] * inv_m;
                for (size_t i = 0; i < hw; ++i) {
                  dx[base + i] = scale * (gd[base + i] - mg - xh[base + i] * mgx);
                }
              } else {
                for (size_t i = 0; i < hw; ++i) {
                  dx[base + i] = scale * gd[base + i];
                }
              }
            }
          }
          xn.accumulate(dx);
        }
      });
}

// ---------------------------------------------------------------------------
// dense / activations
// ---------------------------------------------------------------------------

template <typename T>
Var<T> dense(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (x.value().ndim() != 2 || w.value().ndim() != 2 || b.value().ndim() != 1) {
    throw ShapeError("dense: expected x[N,F], w[F,G], b[G]; got " + shape_str(x.value().shape()) +
                     ", " + shape_str(w.value().shape()) + ", " + shape_str(b.value().shape()));
  }
  const int N = x.value().dim(0), F = x.value().dim(1), G = w.value().dim(1);
  if (w.value().dim(0) != F || b.value().dim(0) != G) {
    throw ShapeError("dense: shape mismatch x " + shape_str(x.value().shape()) + " w " +
                     shape_str(w.value().shape()) + " b " + shape_str(b.value().shape()));
  }
  Tensor<T> out({N, G});
  gemm_nn(N, G, F, x.value().data(), w.value().data(), out.data(), false);
  {
    const T* bd = b.value().data();
    for (int n = 0; n < N; ++n) {
      T* row = out.data() + static_cast<size_t>(n) * G;
      for (int g = 0; g < G; ++g) row[g] += bd[g];
    }
  }
  return make_op<T>("dense", std::move(out), {x, w, b}, [N, F, G](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    auto& bn = *self.inputs[2];
    const T* gd = self.grad.data();
    if (bn.needs_grad) {
      Tensor<T> db(bn.value.shape());
      for (int n = 0; n < N; ++n) {
        for (int g = 0; g < G; ++g) db[g] += gd[static_cast<size_t>(n) * G + g];
      }
      bn.accumulate(db);
    }
    if (wn.needs_grad) {
      Tensor<T> dw(wn.value.shape());
      gemm_tn(F, G, N, xn.value.data(), gd, dw.data(), false);
      wn.accumulate(dw);
    }
    if (xn.needs_grad) {
      Tensor<T> dx(xn.value.shape());
      gemm_nt(N, F, G, gd, wn.value.data(), dx.data(), false);
      xn.accumulate(dx);
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.value().shape());
  const T* xd = x.value().data();
  T* od = out.data();
  const size_t n = out.size();
  const bool probing = probe_state().enabled;
  for (size_t i = 0; i < n; ++i) {
    od[i] = xd[i] > T(0) ? xd[i] : T(0);
    if (probing) probe_margin(std::abs(static_cast<double>(xd[i])));
  }
  return make_op<T>("relu", std::move(out), {x}, [](Node<T>& self) {
    auto& xn = *self.inputs[0];
    if (!xn.needs_grad) return;
    Tensor<T> dx(xn.value.shape());
    const T* xd = xn.value.data();
    const T* gd = self.grad.data();
    const size_t n = dx.size();
    for (size_t i = 0; i < n; ++i) dx[i] = xd[i] > T(0) ? gd[i] : T(0);
    xn.accumulate(dx);
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x.value().shape());
  const T* xd = x.value().data();
  T* od = out.data();
  const size_t n = out.size();
  for (size_t i = 0; i < n; ++i) {
    const T v = xd[i];
    if (v >= T(0)) {
      od[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      od[i] = e / (T(1) + e);
    }
  }
  auto saved = std::make_shared<Tensor<T>>(out);
  return make_op<T>("sigmoid", std::move(out), {x}, [saved](Node<T>& self) {
    auto& xn = *self.inputs[0];
    if (!xn.needs_grad) return;
    Tensor<T> dx(xn.value.shape());
    const T* s = saved->data();
    const T* gd = self.grad.data();
    const size_t n = dx.size();
    for (size_t i = 0; i < n; ++i) dx[i] = gd[i] * s[i] * (T(1) - s[i]);
    xn.accumulate(dx);
  });
}

// ---------------------------------------------------------------------------
// structural
// ---------------------------------------------------------------------------

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  require_4d(a.value(), "concat_channels", "first input");
  require_4d(b.value(), "concat_channels", "second input");
  const auto& sa = a.value().shape();
  const auto& sb = b.value().shape();
  if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
    throw ShapeError("concat_channels: incompatible shapes " + shape_str(sa) + " and " +
                     shape_str(sb));
  }
  const int N = sa[0], Ca = sa[1], Cb = sb[1], H = sa[2], W = sa[3];
  Tensor<T> out({N, Ca + Cb, H, W});
  const size_t hw = static_cast<size_t>(H) * W;
  for (int n = 0; n < N; ++n) {
    T* dst = out.data() + static_cast<size_t>(n) * (Ca + Cb) * hw;
    std::memcpy(dst, a.value().data() + static_cast<size_t>(n) * Ca * hw, sizeof(T) * Ca * hw);
    std::memcpy(dst + static_cast<size_t>(Ca) * hw,
                b.value().data() + static_cast<size_t>(n) * Cb * hw, sizeof(T) * Cb * hw);
  }
  return make_op<T>("concat_channels", std::move(out), {a, b}, [N, Ca, Cb, hw](Node<T>& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    const T* gd = self.grad.data();
    if (an.needs_grad) {
      Tensor<T> da(an.value.shape());
      for (int n = 0; n < N; ++n) {
        std::memcpy(da.data() + static_cast<size_t>(n) * Ca * hw,
                    gd + static_cast<size_t>(n) * (Ca + Cb) * hw, sizeof(T) * Ca * hw);
      }
      an.accumulate(da);
    }
    if (bn.needs_grad) {
      Tensor<T> db(bn.value.shape());
      for (int n = 0; n < N; ++n) {
        std::memcpy(db.data() + static_cast<size_t>(n) * Cb * hw,
                    gd + (static_cast<size_t>(n) * (Ca + Cb) + Ca) * hw, sizeof(T) * Cb * hw);
      }
      bn.accumulate(db);
    }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  if (shape_numel(shape) != x.value().size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.value().shape()) + " as " +
                     shape_str(shape));
  }
  Tensor<T> out(std::move(shape), x.value().vec());
  return make_op<T>("reshape", std::move(out), {x}, [](Node<T>& self) {
    auto& xn = *self.inputs[0];
    if (!xn.needs_grad) return;
    xn.accumulate(Tensor<T>(xn.value.shape(), self.grad.vec()));
  });
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor<T> out(a.value().shape());
  const T* ad = a.value().data();
  const T* bd = b.value().data();
  T* od = out.data();
  const size_t n = out.size();
  for (size_t i = 0; i < n; ++i) od[i] = ad[i] + bd[i];
  return make_op<T>("add", std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& in : self.inputs) {
      if (in->needs_grad) in->accumulate(self.grad);
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor<T> out(a.value().shape());
  const T* ad = a.value().data();
  const T* bd = b.value().data();
  T* od = out.data();
  const size_t n = out.size();
  for (size_t i = 0; i < n; ++i) od[i] = ad[i] * bd[i];
  return make_op<T>("mul", std::move(out), {a, b}, [](Node<T>& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    const T* gd = self.grad.data();
    const size_t n = self.grad.size();
    if (an.needs_grad) {
      Tensor<T> da(an.value.shape());
      const T* bd = bn.value.data();
      for (size_t i = 0; i < n; ++i) da[i] = gd[i] * bd[i];
      an.accumulate(da);
    }
    if (bn.needs_grad) {
      Tensor<T> db(bn.value.shape());
      const T* ad = an.value.data();
      for (size_t i = 0; i < n; ++i) db[i] = gd[i] * ad[i];
      bn.accumulate(db);
    }
  });
}

template <typename T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& s) {
  require_4d(x.value(), "scale_channels", "input");
  const int N = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2),
            W = x.value().dim(3);
  const auto& ss = s.value().shape();
  if (ss != Shape{N, C, 1, 1}) {
    throw ShapeError("scale_channels: scales " + shape_str(ss) + " must be (" +
                     std::to_string(N) + "," + std::to_string(C) + ",1,1)");
  }
  const size_t hw = static_cast<size_t>(H) * W;
  Tensor<T> out(x.value().shape());
  const T* xd = x.value().data();
  const T* sd = s.value().data();
  for (size_t nc = 0; nc < static_cast<size_t>(N) * C; ++nc) {
    const T sv = sd[nc];
    const T* src = xd + nc * hw;
    T* dst = out.data() + nc * hw;
    for (size_t i = 0; i < hw; ++i) dst[i] = src[i] * sv;
  }
  return make_op<T>("scale_channels", std::move(out), {x, s}, [N, C, hw](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& sn = *self.inputs[1];
    const T* gd = self.grad.data();
    if (xn.needs_grad) {
      Tensor<T> dx(xn.value.shape());
      const T* sd = sn.value.data();
      for (size_t nc = 0; nc < static_cast<size_t>(N) * C; ++nc) {
        const T sv = sd[nc];
        const T* g = gd + nc * hw;
        T* d = dx.data() + nc * hw;
        for (size_t i = 0; i < hw; ++i) d[i] = g[i] * sv;
      }
      xn.accumulate(dx);
    }
    if (sn.needs_grad) {
      Tensor<T> ds(sn.value.shape());
      const T* xd = xn.value.data();
      for (size_t nc = 0; nc < static_cast<size_t>(N) * C; ++nc) {
        const T* g = gd + nc * hw;
        const T* xv = xd + nc * hw;
        T acc = T(0);
        for (size_t i = 0; i < hw; ++i) acc += g[i] * xv[i];
        ds[nc] = acc;
      }
      sn.accumulate(ds);
    }
  });
}

template <typename T>
Var<T> scale_spatial(const Var<T>& x, const Var<T>& a) {
  require_4d(x.value(), "scale_spatial", "input");
  const int N = x.value().dim(0), C = x.value().dim(1), H = x.value().dim(2),
            W = x.value().dim(3);
  const auto& as = a.value().shape();
  if (as != Shape{N, 1, H, W}) {
    throw ShapeError("scale_spatial: map " + shape_str(as) + " must be (" + std::to_string(N) +
                     ",1," + std::to_string(H) + "," + std::to_string(W) + ")");
  }
  const size_t hw = static_cast<size_t>(H) * W;
  Tensor<T> out(x.value().shape());
  const T* xd = x.value().data();
  const T* ad = a.value().data();
  for (int n = 0; n < N; ++n) {
    const T* amap = ad + static_cast<size_t>(n) * hw;
    for (int c = 0; c < C; ++c) {
      const size_t base = (static_cast<size_t>(n) * C + c) * hw;
      for (size_t i = 0; i < hw; ++i) out[base + i] = xd[base + i] * amap[i];
    }
  }
  return make_op<T>("scale_spatial", std::move(out), {x, a}, [N, C, hw](Node<T>& self) {
    auto& xn = *self.inputs[0];
    auto& an = *self.inputs[1];
    const T* gd = self.grad.data();
    if (xn.needs_grad) {
      Tensor<T> dx(xn.value.shape());
      const T* ad = an.value.data();
      for (int n = 0; n < N; ++n) {
        const T* amap = ad + static_cast<size_t>(n) * hw;
        for (int c = 0; c < C; ++c) {
          const size_t base = (static_cast<size_t>(n) * C + c) * hw;
          for (size_t i = 0; i < hw; ++i) dx[base + i] = gd[base + i] * amap[i];
        }
      }
      xn.accumulate(dx);
    }
    if (an.needs_grad) {
      Tensor<T> da(an.value.shape());
      const T* xd = xn.value.data();
      for (int n = 0; n < N; ++n) {
        T* amap = da.data() + static_cast<size_t>(n) * hw;
        for (int c = 0; c < C; ++c) {
          const size_t base = (static_cast<size_t>(n) * C + c) * hw;
          for (size_t i = 0; i < hw; ++i) amap[i] += gd[base + i] * xd[base + i];
        }
      }
      an.accumulate(da);
    }
  });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  double acc = 0.0;
  const T* xd = x.value().data();
  const size_t n = x.value().size();
  for (size_t i = 0; i < n; ++i) acc += static_cast<double>(xd[i]);
  return make_op<T>("sum_all", Tensor<T>::scalar(static_cast<T>(acc)), {x}, [](Node<T>& self) {
    auto& xn = *self.inputs[0];
    if (!xn.needs_grad) return;
    xn.accumulate(Tensor<T>::full(xn.value.shape(), self.grad[0]));
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  double acc = 0.0;
  const T* xd = x.value().data();
  const size_t n = x.value().size();
  for (size_t i = 0; i < n; ++i) acc += static_cast<double>(xd[i]);
  const T inv = T(1) / static_cast<T>(n);
  return make_op<T>("mean_all", Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n))),
                    {x}, [inv](Node<T>& self) {
                      auto& xn = *self.inputs[0];
                      if (!xn.needs_grad) return;
                      xn.accumulate(Tensor<T>::full(xn.value.shape(), self.grad[0] * inv));
                    });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, Tensor<T> weights) {
  require_same_shape(x.value(), weights, "weighted_sum");
  double acc = 0.0;
  const T* xd = x.value().data();
  const T* wd = weights.data();
  const size_t n = x.value().size();
  for (size_t i = 0; i < n; ++i) acc += static_cast<double>(xd[i]) * static_cast<double>(wd[i]);
  auto w = std::make_shared<Tensor<T>>(std::move(weights));
  return make_op<T>("weighted_sum", Tensor<T>::scalar(static_cast<T>(acc)), {x},
                    [w](Node<T>& self) {
                      auto& xn = *self.inputs[0];
                      if (!xn.needs_grad) return;
                      Tensor<T> dx(xn.value.shape());
                      const T g = self.grad[0];
                      const size_t n = dx.size();
                      for (size_t i = 0; i < n; ++i) dx[i] = g * (*w)[i];
                      xn.accumulate(dx);
                    });
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

#define SEEA_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> conv2d_naive<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, \
                                     Padding);                                                   \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int, Padding);         \
  template Var<T> maxpool2d<T>(const Var<T>&, int, int);                                        \
  template Var<T> global_avg_pool<T>(const Var<T>&);                                            \
  template Var<T> upsample2d<T>(const Var<T>&, int);                                            \
  template Var<T> batchnorm2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, Tensor<T>&,       \
                                 Tensor<T>&, Mode, T, T);                                       \
  template Var<T> dense<T>(const Var<T>&, const Var<T>&, const Var<T>&);                        \
  template Var<T> relu<T>(const Var<T>&);                                                       \
  template Var<T> sigmoid<T>(const Var<T>&);                                                    \
  template Var<T> concat_channels<T>(const Var<T>&, const Var<T>&);                             \
  template Var<T> reshape<T>(const Var<T>&, Shape);                                             \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                         \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                         \
  template Var<T> scale_channels<T>(const Var<T>&, const Var<T>&);                              \
  template Var<T> scale_spatial<T>(const Var<T>&, const Var<T>&);                               \
  template Var<T> sum_all<T>(const Var<T>&);                                                    \
  template Var<T> mean_all<T>(const Var<T>&);                                                   \
  template Var<T> weighted_sum<T>(const Var<T>&, Tensor<T>);

SEEA_INSTANTIATE_OPS(float)
SEEA_INSTANTIATE_OPS(double)

#undef SEEA_INSTANTIATE_OPS

}  // namespace seea
