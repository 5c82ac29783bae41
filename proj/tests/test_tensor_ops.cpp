#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "seea/gemm.hpp"
#include "seea/ops.hpp"
#include "seea/rng.hpp"

using namespace seea;

namespace {
template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}
}  // namespace

TEST_CASE("conv2d matches hand-computed sliding window sums") {
  // 3x3 input 1..9, all-ones 3x3 kernel, same padding.
  Tensor<double> x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> w = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  Tensor<double> b({1});
  auto y = conv2d(Var<double>::constant(x), Var<double>::constant(w), Var<double>::constant(b));
  CHECK(y.value().shape() == Shape{1, 1, 3, 3});
  CHECK(y.value().at4(0, 0, 1, 1) == doctest::Approx(45.0));  // full window sum
  CHECK(y.value().at4(0, 0, 0, 0) == doctest::Approx(12.0));  // 1+2+4+5
}

TEST_CASE("conv2d identity kernel reproduces the input") {
  Rng rng(7);
  Tensor<double> x = random_tensor<double>({2, 1, 5, 5}, rng);
  Tensor<double> w({1, 1, 3, 3});
  w.at4(0, 0, 1, 1) = 1.0;
  Tensor<double> b({1});
  auto y = conv2d(Var<double>::constant(x), Var<double>::constant(w), Var<double>::constant(b));
  for (size_t i = 0; i < x.size(); ++i) CHECK(y.value()[i] == doctest::Approx(x[i]));
}

TEST_CASE("conv2d zero kernel yields the bias everywhere") {
  Rng rng(8);
  Tensor<float> x = random_tensor<float>({1, 3, 4, 4}, rng);
  Tensor<float> w({2, 3, 3, 3});
  Tensor<float> b({2}, {0.5f, -1.25f});
  auto y = conv2d(Var<float>::constant(x), Var<float>::constant(w), Var<float>::constant(b));
  for (int h = 0; h < 4; ++h) {
    for (int wdx = 0; wdx < 4; ++wdx) {
      CHECK(y.value().at4(0, 0, h, wdx) == 0.5f);
      CHECK(y.value().at4(0, 1, h, wdx) == -1.25f);
    }
  }
}

TEST_CASE("conv2d rejects channel mismatch with both shapes in the message") {
  Tensor<float> x({1, 3, 4, 4});
  Tensor<float> w({2, 4, 3, 3});
  Tensor<float> b({2});
  try {
    conv2d(Var<float>::constant(x), Var<float>::constant(w), Var<float>::constant(b));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(1,3,4,4)") != std::string::npos);
    CHECK(msg.find("(2,4,3,3)") != std::string::npos);
  }
}

TEST_CASE("blocked conv equals the naive oracle bitwise") {
  Rng rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + static_cast<int>(rng.bounded(2));
    const int cin = 1 + static_cast<int>(rng.bounded(4));
    const int cout = 1 + static_cast<int>(rng.bounded(5));
    const int k = 1 + 2 * static_cast<int>(rng.bounded(3));  // 1, 3, 5
    const int h = k + static_cast<int>(rng.bounded(9));
    const int w = k + static_cast<int>(rng.bounded(9));
    const int stride = 1 + static_cast<int>(rng.bounded(2));
    const Padding pad = rng.bounded(2) ? Padding::kSame : Padding::kValid;

    Tensor<double> x = random_tensor<double>({n, cin, h, w}, rng);
    Tensor<double> wt = random_tensor<double>({cout, cin, k, k}, rng);
    Tensor<double> b = random_tensor<double>({cout}, rng);

    auto fast =
        conv2d(Var<double>::constant(x), Var<double>::constant(wt), Var<double>::constant(b),
               stride, pad);
    Tensor<double> slow = conv2d_naive(x, wt, b, stride, pad);
    REQUIRE(fast.value().shape() == slow.shape());
    for (size_t i = 0; i < slow.size(); ++i) {
      REQUIRE(fast.value()[i] == slow[i]);  // bitwise
    }
  }
}

TEST_CASE("same padding with stride 1 preserves spatial shape for odd kernels") {
  Rng rng(3);
  for (int k : {1, 3, 5, 7}) {
    for (int h : {7, 8, 12}) {
      Tensor<float> x = random_tensor<float>({1, 2, h, h + 1}, rng);
      Tensor<float> w = random_tensor<float>({3, 2, k, k}, rng);
      Tensor<float> b({3});
      auto y =
          conv2d(Var<float>::constant(x), Var<float>::constant(w), Var<float>::constant(b), 1,
                 Padding::kSame);
      CHECK(y.value().shape() == Shape{1, 3, h, h + 1});
    }
  }
}

TEST_CASE("maxpool picks per-window maxima and truncates odd edges") {
  Tensor<float> x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto y = maxpool2d(Var<float>::constant(x));
  CHECK(y.value().shape() == Shape{1, 1, 1, 1});
  CHECK(y.value()[0] == 4.0f);

  Tensor<float> c = Tensor<float>::full({2, 3, 6, 6}, 2.5f);
  auto yc = maxpool2d(Var<float>::constant(c));
  CHECK(yc.value().shape() == Shape{2, 3, 3, 3});
  for (size_t i = 0; i < yc.value().size(); ++i) CHECK(yc.value()[i] == 2.5f);

  Tensor<float> odd = Tensor<float>::full({1, 1, 5, 5}, 1.0f);
  CHECK(maxpool2d(Var<float>::constant(odd)).value().shape() == Shape{1, 1, 2, 2});

  Tensor<float> m({1, 1, 4, 4}, {1, 5, 2, 0, 3, 4, 1, 1, 0, 0, 9, 2, 0, 0, 3, 1});
  auto ym = maxpool2d(Var<float>::constant(m));
  CHECK(ym.value().vec() == std::vector<float>{5, 2, 0, 9});
}

TEST_CASE("maxpool rejects windows larger than the input") {
  Tensor<float> x({1, 1, 3, 3});
  CHECK_THROWS_AS(maxpool2d(Var<float>::constant(x), 4, 4), ShapeError);
}

TEST_CASE("global_avg_pool computes per-channel means") {
  Tensor<double> x({1, 2, 2, 2}, {1, 2, 3, 4, 0, 0, 0, 0});
  auto y = global_avg_pool(Var<double>::constant(x));
  CHECK(y.value().shape() == Shape{1, 2, 1, 1});
  CHECK(y.value()[0] == doctest::Approx(2.5));
  CHECK(y.value()[1] == doctest::Approx(0.0));

  Tensor<double> c = Tensor<double>::full({3, 4, 5, 7}, -1.75);
  auto yc = global_avg_pool(Var<double>::constant(c));
  for (size_t i = 0; i < yc.value().size(); ++i) CHECK(yc.value()[i] == doctest::Approx(-1.75));
}

TEST_CASE("batchnorm2d train normalizes by batch statistics") {
  // Single channel, batch values {1, 3}: mean 2, var 1.
  Tensor<double> x({2, 1, 1, 1}, {1, 3});
  Tensor<double> rm({1}), rv = Tensor<double>::full({1}, 1.0);
  auto y = batchnorm2d(Var<double>::constant(x), Var<double>::constant(Tensor<double>::full({1}, 1.0)),
                       Var<double>::constant(Tensor<double>({1})), rm, rv, Mode::kTrain, 0.1,
                       1e-10);
  CHECK(y.value()[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(y.value()[1] == doctest::Approx(1.0).epsilon(1e-6));
  // Running stats moved toward the batch stats.
  CHECK(rm[0] == doctest::Approx(0.2));
  CHECK(rv[0] == doctest::Approx(1.0));
}

TEST_CASE("batchnorm2d infer with identity stats approximates the input") {
  Rng rng(5);
  Tensor<float> x = random_tensor<float>({2, 3, 4, 4}, rng);
  Tensor<float> rm({3}), rv = Tensor<float>::full({3}, 1.0f);
  auto y = batchnorm2d(Var<float>::constant(x),
                       Var<float>::constant(Tensor<float>::full({3}, 1.0f)),
                       Var<float>::constant(Tensor<float>({3})), rm, rv, Mode::kInfer, 0.1f,
                       1e-5f);
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(y.value()[i] == doctest::Approx(x[i]).epsilon(1e-4));
  }
}

TEST_CASE("batchnorm2d train with zero gamma emits beta") {
  Rng rng(6);
  Tensor<float> x = random_tensor<float>({2, 2, 3, 3}, rng);
  Tensor<float> rm({2}), rv = Tensor<float>::full({2}, 1.0f);
  auto y = batchnorm2d(Var<float>::constant(x), Var<float>::constant(Tensor<float>({2})),
                       Var<float>::constant(Tensor<float>::full({2}, 0.75f)), rm, rv,
                       Mode::kTrain, 0.1f, 1e-5f);
  for (size_t i = 0; i < y.value().size(); ++i) CHECK(y.value()[i] == 0.75f);
}

TEST_CASE("batchnorm2d infer without running stats is an explicit error") {
  Tensor<float> x({1, 2, 2, 2});
  Tensor<float> rm, rv;
  CHECK_THROWS_AS(batchnorm2d(Var<float>::constant(x),
                              Var<float>::constant(Tensor<float>::full({2}, 1.0f)),
                              Var<float>::constant(Tensor<float>({2})), rm, rv, Mode::kInfer,
                              0.1f, 1e-5f),
                  ValueError);
}

TEST_CASE("dense computes affine maps") {
  // Identity weight.
  Tensor<double> x({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> eye({3, 3});
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  auto y = dense(Var<double>::constant(x), Var<double>::constant(eye),
                 Var<double>::constant(Tensor<double>({3})));
  CHECK(y.value().vec() == x.vec());

  // [1,2] * [[1],[1]] + [3] = [6].
  Tensor<double> x2({1, 2}, {1, 2});
  Tensor<double> w2({2, 1}, {1, 1});
  Tensor<double> b2({1}, {3});
  auto y2 = dense(Var<double>::constant(x2), Var<double>::constant(w2), Var<double>::constant(b2));
  CHECK(y2.value()[0] == doctest::Approx(6.0));

  // Zero weight broadcasts the bias.
  Tensor<double> w3({2, 4});
  Tensor<double> b3({4}, {1, 2, 3, 4});
  auto y3 = dense(Var<double>::constant(x2), Var<double>::constant(w3), Var<double>::constant(b3));
  CHECK(y3.value().vec() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("activations match closed forms") {
  Tensor<double> x({4}, {0.0, -3.0, 3.0, std::log(3.0)});
  auto s = sigmoid(Var<double>::constant(x));
  CHECK(s.value()[0] == doctest::Approx(0.5));
  CHECK(s.value()[3] == doctest::Approx(0.75));
  auto r = relu(Var<double>::constant(x));
  CHECK(r.value()[1] == 0.0);
  CHECK(r.value()[2] == 3.0);
}

TEST_CASE("upsample2d replicates nearest neighbours") {
  Tensor<float> x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto y = upsample2d(Var<float>::constant(x), 2);
  CHECK(y.value().shape() == Shape{1, 1, 4, 4});
  CHECK(y.value().vec() ==
        std::vector<float>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});

  Tensor<float> c = Tensor<float>::full({2, 3, 3, 3}, 9.5f);
  auto yc = upsample2d(Var<float>::constant(c), 2);
  CHECK(yc.value().shape() == Shape{2, 3, 6, 6});
  for (size_t i = 0; i < yc.value().size(); ++i) CHECK(yc.value()[i] == 9.5f);
}

TEST_CASE("upsample2d backward sums the replica gradients") {
  Tensor<double> x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto xv = Var<double>::leaf(x, true);
  auto y = upsample2d(xv, 2);
  auto loss = sum_all(y);
  backward(loss);
  for (size_t i = 0; i < 4; ++i) CHECK(xv.grad()[i] == doctest::Approx(4.0));
}

TEST_CASE("concat_channels stacks channels and rejects mismatches") {
  Rng rng(9);
  Tensor<float> a = random_tensor<float>({1, 2, 4, 4}, rng);
  Tensor<float> b = random_tensor<float>({1, 3, 4, 4}, rng);
  auto y = concat_channels(Var<float>::constant(a), Var<float>::constant(b));
  CHECK(y.value().shape() == Shape{1, 5, 4, 4});
  CHECK(y.value().at4(0, 0, 1, 1) == a.at4(0, 0, 1, 1));
  CHECK(y.value().at4(0, 2, 1, 1) == b.at4(0, 0, 1, 1));

  // Concat with a zero-channel tensor is the identity.
  Tensor<float> empty({1, 0, 4, 4});
  auto ye = concat_channels(Var<float>::constant(a), Var<float>::constant(empty));
  CHECK(ye.value().shape() == Shape{1, 2, 4, 4});
  CHECK(ye.value().vec() == a.vec());

  Tensor<float> bad({1, 2, 5, 4});
  CHECK_THROWS_AS(concat_channels(Var<float>::constant(a), Var<float>::constant(bad)),
                  ShapeError);
}

TEST_CASE("concat_channels backward splits the gradient") {
  Tensor<double> a({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor<double> b({1, 2, 2, 2}, {5, 6, 7, 8, 9, 10, 11, 12});
  auto av = Var<double>::leaf(a, true);
  auto bv = Var<double>::leaf(b, true);
  auto y = concat_channels(av, bv);
  Tensor<double> w(y.value().shape());
  for (size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(i + 1);
  auto loss = weighted_sum(y, w);
  backward(loss);
  CHECK(av.grad().vec() == std::vector<double>{1, 2, 3, 4});
  CHECK(bv.grad().vec() == std::vector<double>{5, 6, 7, 8, 9, 10, 11, 12});
}

TEST_CASE("scale_channels broadcasts per-channel factors") {
  Tensor<double> x = Tensor<double>::full({1, 2, 2, 2}, 2.0);
  Tensor<double> s({1, 2, 1, 1}, {0.5, 1.0});
  auto y = scale_channels(Var<double>::constant(x), Var<double>::constant(s));
  CHECK(y.value().at4(0, 0, 0, 0) == doctest::Approx(1.0));
  CHECK(y.value().at4(0, 1, 0, 0) == doctest::Approx(2.0));

  auto y1 = scale_channels(Var<double>::constant(x),
                           Var<double>::constant(Tensor<double>::full({1, 2, 1, 1}, 1.0)));
  CHECK(y1.value().vec() == x.vec());
  auto y0 = scale_channels(Var<double>::constant(x),
                           Var<double>::constant(Tensor<double>({1, 2, 1, 1})));
  for (size_t i = 0; i < y0.value().size(); ++i) CHECK(y0.value()[i] == 0.0);
}

TEST_CASE("gap of scaled input equals scaled gap") {
  Rng rng(11);
  Tensor<double> x = random_tensor<double>({2, 3, 4, 4}, rng);
  Tensor<double> s({2, 3, 1, 1});
  for (size_t i = 0; i < s.size(); ++i) s[i] = rng.uniform(0.1, 2.0);
  auto lhs = global_avg_pool(scale_channels(Var<double>::constant(x), Var<double>::constant(s)));
  auto rhs = global_avg_pool(Var<double>::constant(x));
  for (size_t i = 0; i < lhs.value().size(); ++i) {
    CHECK(lhs.value()[i] == doctest::Approx(rhs.value()[i] * s[i]).epsilon(1e-12));
  }
}

TEST_CASE("gemm variants agree with naive products") {
  Rng rng(13);
  const int M = 7, N = 9, K = 11;
  std::vector<double> A(M * K), B(K * N), Bt(N * K), At(K * M);
  for (auto& v : A) v = rng.uniform(-1, 1);
  for (auto& v : B) v = rng.uniform(-1, 1);
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) Bt[n * K + k] = B[k * N + n];
  }
  for (int k = 0; k < K; ++k) {
    for (int m = 0; m < M; ++m) At[k * M + m] = A[m * K + k];
  }
  std::vector<double> ref(M * N, 0.0);
  for (int i = 0; i < M; ++i) {
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < N; ++j) ref[i * N + j] += A[i * K + k] * B[k * N + j];
    }
  }
  std::vector<double> c1(M * N), c2(M * N), c3(M * N);
  gemm_nn(M, N, K, A.data(), B.data(), c1.data(), false);
  gemm_nt(M, N, K, A.data(), Bt.data(), c2.data(), false);
  gemm_tn(M, N, K, At.data(), B.data(), c3.data(), false);
  for (int i = 0; i < M * N; ++i) {
    CHECK(c1[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    CHECK(c2[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    CHECK(c3[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}
