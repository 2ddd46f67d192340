#include <cmath>

#include "cizsl/diffmath.hpp"
#include "cizsl/errors.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cizsl;
using cizsl::testing::fd_compare;
using cizsl::testing::random_tensor;

namespace {

ad::Var mlp_critic(const BoundParams& b, ad::Var x) {
  ad::Var h = ad::leaky_relu(ad::add(ad::matmul(x, b["W1"]), b["b1"]), 0.2);
  h = ad::tanh(ad::add(ad::matmul(h, b["W2"]), b["b2"]));
  return ad::add(ad::matmul(h, b["w3"]), b["b3"]);
}

ParamStore random_mlp(Rng& rng, std::size_t in, std::size_t hidden) {
  ParamStore p;
  p.add("W1", random_tensor(rng, in, hidden, 0.7));
  p.add("b1", random_tensor(rng, 1, hidden, 0.1));
  p.add("W2", random_tensor(rng, hidden, hidden, 0.5));
  p.add("b2", random_tensor(rng, 1, hidden, 0.1));
  p.add("w3", random_tensor(rng, hidden, 1, 0.7));
  p.add("b3", random_tensor(rng, 1, 1, 0.1));
  return p;
}

}  // namespace

TEST_CASE("grad_scalar: sum of squares") {
  ParamStore p;
  p.add("w", Tensor::from_rows({{3.0}}));
  p.add("b", Tensor::from_rows({{1.0, 2.0}}));
  auto g = grad_scalar(p, [](ad::Tape&, const BoundParams& b) { return ad::sum(ad::square(b["w"])); });
  CHECK(g.value == 9.0);
  CHECK(g.grads.at("w").item() == 6.0);
  // unused parameter gets a zero tensor of its own shape
  CHECK(g.grads.at("b") == Tensor(1, 2, 0.0));
}

TEST_CASE("grad_scalar: two-layer perceptron against finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    ParamStore p;
    p.add("W1", random_tensor(rng, 6, 8, 0.5));
    p.add("b1", random_tensor(rng, 1, 8, 0.1));
    p.add("W2", random_tensor(rng, 8, 3, 0.5));
    p.add("b2", random_tensor(rng, 1, 3, 0.1));
    const Tensor x = random_tensor(rng, 5, 6);
    Tensor y(5, 3);
    for (std::size_t i = 0; i < 5; ++i) y(i, i % 3) = 1.0;
    ScalarLoss loss = [&](ad::Tape& t, const BoundParams& b) {
      ad::Var h = ad::leaky_relu(ad::add(ad::matmul(t.constant(x), b["W1"]), b["b1"]), 0.2);
      ad::Var logp = ad::log_softmax_rows(ad::add(ad::matmul(h, b["W2"]), b["b2"]));
      return -ad::mean(ad::sum_cols(ad::mul(t.constant(y), logp)));
    };
    auto g = grad_scalar(p, loss);
    CHECK(fd_compare(p, g.grads, loss).max_rel_error < 1e-4);
  }
}

TEST_CASE("grad_scalar: non-finite gradient names the parameter") {
  ParamStore p;
  p.add("alpha", Tensor::from_rows({{0.0}}));
  CHECK_THROWS_WITH_AS(
      grad_scalar(p, [](ad::Tape&, const BoundParams& b) { return ad::sum(ad::sqrt(ad::square(b["alpha"]))); }),
      "non-finite gradient for parameter 'alpha'", NumericError);
  CHECK_THROWS_AS(grad_scalar(p, [](ad::Tape&, const BoundParams& b) { return ad::sum(ad::log(b["alpha"])); }),
                  NumericError);
}

TEST_CASE("input_gradient") {
  const Tensor w = Tensor::from_rows({{1.5}, {-2.0}, {0.25}});
  const Tensor x = Tensor::from_rows({{1, 2, 3}, {-1, 0, 4}});

  SUBCASE("linear critic gives its weight vector") {
    Tensor g = input_gradient([&](ad::Tape& t, ad::Var v) { return ad::matmul(v, t.constant(w)); }, x);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(g(i, j) == w(j, 0));
  }
  SUBCASE("constant critic gives zero") {
    Tensor g = input_gradient([&](ad::Tape& t, ad::Var) { return t.constant(Tensor(2, 1, 3.0)); }, x);
    CHECK(g == Tensor(2, 3, 0.0));
  }
  SUBCASE("random MLP against finite differences over x") {
    Rng rng(12);
    const ParamStore mlp = random_mlp(rng, 3, 6);
    const Tensor xr = random_tensor(rng, 4, 3);
    auto critic = [&](ad::Tape& t, ad::Var v) {
      BoundParams b(t, mlp, false);
      return mlp_critic(b, v);
    };
    Tensor g = input_gradient(critic, xr);
    ParamStore as_param;
    as_param.add("x", xr);
    ParamStore analytic;
    analytic.add("x", g);
    auto report = fd_compare(as_param, analytic, [&](ad::Tape& t, const BoundParams& b) {
      return ad::sum(critic(t, b["x"]));
    });
    CHECK(report.max_rel_error < 1e-4);
  }
  SUBCASE("width mismatch") {
    CHECK_THROWS_AS(input_gradient([&](ad::Tape& t, ad::Var v) { return ad::matmul(v, t.constant(w)); },
                                   Tensor(2, 4)),
                    DimensionError);
  }
}

TEST_CASE("gradient penalty: linear critic closed form") {
  ParamStore p;
  p.add("w", Tensor::from_rows({{3.0}, {4.0}}));
  const Tensor x = Tensor::from_rows({{0.3, -1.0}, {2.0, 0.5}});
  auto res = grad_penalty_param_grad(
      p, [](ad::Tape&, const BoundParams& b, ad::Var v) { return ad::matmul(v, b["w"]); }, x);
  // ||w|| = 5: penalty (5-1)^2, gradient 2(||w||-1) w/||w||
  CHECK(res.value == doctest::Approx(16.0).epsilon(1e-14));
  CHECK(res.grads.at("w")(0, 0) == doctest::Approx(2.0 * 4.0 * 3.0 / 5.0).epsilon(1e-14));
  CHECK(res.grads.at("w")(1, 0) == doctest::Approx(2.0 * 4.0 * 4.0 / 5.0).epsilon(1e-14));
}

TEST_CASE("gradient penalty: unit-norm critic has zero penalty") {
  ParamStore p;
  p.add("w", Tensor::from_rows({{0.6}, {0.8}}));
  const Tensor x = Tensor::from_rows({{1.0, 1.0}});
  BoundCritic critic = [](ad::Tape&, const BoundParams& b, ad::Var v) { return ad::matmul(v, b["w"]); };
  auto res = grad_penalty_param_grad(p, critic, x);
  CHECK(std::abs(res.value) < 1e-15);
  ScalarLoss loss = [&](ad::Tape& t, const BoundParams& b) {
    std::size_t degenerate = 0;
    return gradient_penalty(t, [&](ad::Tape& tt, ad::Var v) { return critic(tt, b, v); }, x, degenerate);
  };
  CHECK(fd_compare(p, res.grads, loss).max_rel_error < 1e-4);
}

TEST_CASE("gradient penalty: random critic against finite differences") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const ParamStore p = random_mlp(rng, 5, 7);
    const Tensor x = random_tensor(rng, 4, 5);
    BoundCritic critic = [](ad::Tape&, const BoundParams& b, ad::Var v) { return mlp_critic(b, v); };
    auto res = grad_penalty_param_grad(p, critic, x);
    ScalarLoss loss = [&](ad::Tape& t, const BoundParams& b) {
      std::size_t degenerate = 0;
      return gradient_penalty(t, [&](ad::Tape& tt, ad::Var v) { return critic(tt, b, v); }, x, degenerate);
    };
    CHECK(fd_compare(p, res.grads, loss).max_rel_error < 1e-3);
  }
}

TEST_CASE("gradient penalty: zero input gradient is a degenerate event") {
  ParamStore p;
  p.add("w", Tensor::from_rows({{0.0}, {0.0}}));
  auto res = grad_penalty_param_grad(
      p, [](ad::Tape&, const BoundParams& b, ad::Var v) { return ad::matmul(v, b["w"]); },
      Tensor::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
  CHECK(res.degenerate_rows == 2);
  CHECK(res.value == 1.0);
  CHECK(res.grads.at("w") == Tensor(2, 1, 0.0));
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradients leave parameters unchanged") {
    ParamStore p;
    p.add("a", Tensor::from_rows({{1.0, -2.0}}));
    const ParamStore before = p;
    AdamState s = AdamState::for_params(p);
    adam_step(p, p.zeros_like(), s, {});
    CHECK(p == before);
    CHECK(s.step == 1);
  }
  SUBCASE("scalar reference trace on theta^2/2") {
    // Hand-stepped oracle: g = theta; m = (1-b1) g; v = (1-b2) g^2;
    // bias corrections make m_hat = g, v_hat = g^2 on step one.
    ParamStore p;
    p.add("theta", Tensor::from_rows({{1.0}}));
    AdamState s = AdamState::for_params(p);
    const AdamConfig cfg;  // lr 1e-3, b1 0.5, b2 0.9, eps 1e-8
    double theta = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
      ParamStore g;
      g.add("theta", Tensor::from_rows({{p.at("theta").item()}}));
      adam_step(p, g, s, cfg);
      const double grad = theta;
      m = 0.5 * m + 0.5 * grad;
      v = 0.9 * v + 0.1 * grad * grad;
      theta -= 0.001 * (m / (1 - std::pow(0.5, t))) / (std::sqrt(v / (1 - std::pow(0.9, t))) + 1e-8);
      CHECK(p.at("theta").item() == doctest::Approx(theta).epsilon(1e-15));
    }
    CHECK(s.step == 3);
    ParamStore first;
    first.add("theta", Tensor::from_rows({{1.0}}));
    AdamState s1 = AdamState::for_params(first);
    adam_step(first, first, s1, cfg);
    CHECK(first.at("theta").item() == doctest::Approx(1.0 - 0.001 / (1.0 + 1e-8)).epsilon(1e-15));
  }
  SUBCASE("deterministic") {
    ParamStore a, b;
    a.add("x", Tensor::from_rows({{0.3, 0.7}}));
    b = a;
    AdamState sa = AdamState::for_params(a), sb = AdamState::for_params(b);
    ParamStore g;
    g.add("x", Tensor::from_rows({{0.1, -0.4}}));
    for (int i = 0; i < 2; ++i) {
      adam_step(a, g, sa, {});
      adam_step(b, g, sb, {});
    }
    CHECK(a == b);
  }
  SUBCASE("shape mismatch") {
    ParamStore p;
    p.add("x", Tensor(1, 2));
    ParamStore g;
    g.add("x", Tensor(2, 1));
    AdamState s = AdamState::for_params(p);
    CHECK_THROWS_AS(adam_step(p, g, s, {}), DimensionError);
  }
}
