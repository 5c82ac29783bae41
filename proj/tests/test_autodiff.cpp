#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "seea/gradcheck.hpp"
#include "seea/ops.hpp"
#include "seea/optim.hpp"
#include "seea/rng.hpp"

using namespace seea;

TEST_CASE("backward of sum gives all-ones gradient") {
  Tensor<double> x({2, 3}, {1, 2, 3, 4, 5, 6});
  auto xv = Var<double>::leaf(x, true);
  backward(sum_all(xv));
  for (size_t i = 0; i < x.size(); ++i) CHECK(xv.grad()[i] == 1.0);
}

TEST_CASE("backward of sum of squares gives 2x") {
  Tensor<double> x({4}, {1, -2, 3, 0.5});
  auto xv = Var<double>::leaf(x, true);
  backward(sum_all(mul(xv, xv)));
  for (size_t i = 0; i < x.size(); ++i) CHECK(xv.grad()[i] == doctest::Approx(2.0 * x[i]));
}

TEST_CASE("backward rejects non-scalar roots") {
  Tensor<double> x({2, 2});
  auto xv = Var<double>::leaf(x, true);
  CHECK_THROWS_AS(backward(add(xv, xv)), ValueError);
}

TEST_CASE("fan-out gradients sum across paths") {
  // y = f(x) + g(x) with f = 3x and g = x*x; dy/dx = 3 + 2x.
  Tensor<double> x({3}, {0.5, -1.0, 2.0});
  auto xv = Var<double>::leaf(x, true);
  auto three = Var<double>::constant(Tensor<double>::full({3}, 3.0));
  auto y = add(mul(three, xv), mul(xv, xv));
  backward(sum_all(y));
  for (size_t i = 0; i < 3; ++i) {
    CHECK(xv.grad()[i] == doctest::Approx(3.0 + 2.0 * x[i]));
  }
}

TEST_CASE("grad shape equals value shape after backward") {
  Rng rng(3);
  Tensor<double> x({2, 2, 4, 4});
  for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
  auto xv = Var<double>::leaf(x, true);
  auto y = sigmoid(xv);
  backward(mean_all(y));
  CHECK(xv.grad().shape() == xv.value().shape());
}

TEST_CASE("identical inputs give bitwise identical gradients") {
  auto run = [] {
    Rng rng(99);
    Tensor<float> x({2, 3, 8, 8});
    for (size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform(-1, 1));
    Tensor<float> w({4, 3, 3, 3});
    for (size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(rng.uniform(-0.5, 0.5));
    auto xv = Var<float>::leaf(x, true);
    auto wv = Var<float>::leaf(w, true);
    auto y = conv2d(xv, wv, Var<float>::constant(Tensor<float>({4})));
    backward(mean_all(relu(y)));
    return std::make_pair(wv.grad().vec(), xv.grad().vec());
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("every primitive and block passes the finite-difference check") {
  for (const auto& name : gradcheck_names()) {
    CAPTURE(name);
    const GradCheckResult r = run_gradcheck(name, 20240601u);
    CAPTURE(r.max_rel_err);
    CAPTURE(r.kink_margin);
    CHECK(r.pass);
  }
}

TEST_CASE("adam first step moves by about -lr and zero grads are a no-op") {
  ParameterStore<float> store;
  store.add("w", Tensor<float>::full({4}, 1.0f), true);
  store.add("bn.running_mean", Tensor<float>::full({2}, 0.25f), false);

  AdamConfig<float> cfg;
  cfg.lr = 0.01f;
  Adam<float> opt(store, cfg);

  std::vector<Tensor<float>> grads(store.size());
  grads[0] = Tensor<float>::full({4}, 1.0f);
  opt.step(store, grads);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(store[0].tensor[i] == doctest::Approx(1.0f - cfg.lr).epsilon(1e-4));
  }
  // Non-trainable entries untouched.
  CHECK(store[1].tensor[0] == 0.25f);

  // Zero gradient for all steps leaves parameters unchanged.
  ParameterStore<float> store2;
  store2.add("w", Tensor<float>::full({3}, 2.0f), true);
  Adam<float> opt2(store2, cfg);
  std::vector<Tensor<float>> zeros(1);
  zeros[0] = Tensor<float>({3});
  for (int i = 0; i < 5; ++i) opt2.step(store2, zeros);
  for (size_t i = 0; i < 3; ++i) CHECK(store2[0].tensor[i] == 2.0f);
}

TEST_CASE("adam with lr zero is a no-op on all parameters") {
  Rng rng(17);
  ParameterStore<float> store;
  Tensor<float> w({8});
  for (size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(rng.uniform(-1, 1));
  store.add("w", w, true);
  AdamConfig<float> cfg;
  cfg.lr = 0.0f;
  Adam<float> opt(store, cfg);
  std::vector<Tensor<float>> grads(1);
  grads[0] = Tensor<float>::full({8}, 0.37f);
  for (int i = 0; i < 3; ++i) opt.step(store, grads);
  CHECK(store[0].tensor.vec() == w.vec());
}
