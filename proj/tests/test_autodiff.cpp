#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cxnn/autodiff.hpp"
#include "cxnn/ops.hpp"
#include "cxnn/rng.hpp"

using namespace cxnn;

TEST_CASE("split-real gradient of |w|^2 at w = 3+4i is 6 + 8i") {
  auto w = Parameter<double>::complex(1, "w", Tensor<double>(Shape{1}, {3.0}),
                                      Tensor<double>(Shape{1}, {4.0}));
  Tape<double> tape;
  TapeVal wv = tape.leaf(w);
  Var loss = ops::add(tape, ops::sum(tape, ops::mul(tape, wv.re, wv.re)),
                      ops::sum(tape, ops::mul(tape, wv.im, wv.im)));
  tape.backward(loss);
  CHECK(w.grad_re[0] == doctest::Approx(6.0));
  CHECK(w.grad_im[0] == doctest::Approx(8.0));
}

TEST_CASE("constants get no gradients; parameter-free losses leave grads zero") {
  auto w = Parameter<double>::real(2, "w", Tensor<double>(Shape{3}, {1, 2, 3}));
  Tape<double> tape;
  Var x = tape.constant(Tensor<double>(Shape{4}, {1, 1, 1, 1}));
  Var loss = ops::sum(tape, x);
  tape.backward(loss);
  for (int64_t i = 0; i < 3; ++i) CHECK(w.grad_re[i] == 0.0);
}

TEST_CASE("gradient of Re(w * (1+2i)) is (1, -2)") {
  // Re((w_r + i w_i)(1 + 2i)) = w_r - 2 w_i
  auto w = Parameter<double>::complex(3, "w", Tensor<double>(Shape{1}, {0.7}),
                                      Tensor<double>(Shape{1}, {-1.3}));
  Tape<double> tape;
  TapeVal wv = tape.leaf(w);
  // complex multiply by the constant (1 + 2i), take the real plane
  Var re = ops::sub(tape, ops::scale(tape, wv.re, 1.0), ops::scale(tape, wv.im, 2.0));
  Var loss = ops::sum(tape, re);
  tape.backward(loss);
  CHECK(w.grad_re[0] == doctest::Approx(1.0));
  CHECK(w.grad_im[0] == doctest::Approx(-2.0));
}

TEST_CASE("backward contract errors") {
  auto w = Parameter<double>::real(4, "w", Tensor<double>(Shape{2}, {1, 2}));
  Tape<double> tape;
  TapeVal wv = tape.leaf(w);
  Var y = ops::mul(tape, wv.re, wv.re);

  SUBCASE("non-scalar loss") { CHECK_THROWS_AS(tape.backward(y), ContractError); }
  SUBCASE("backward twice without re-recording") {
    Var loss = ops::sum(tape, y);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), StateError);
  }
  SUBCASE("clear resets the backward latch") {
    Var loss = ops::sum(tape, y);
    tape.backward(loss);
    tape.clear();
    TapeVal wv2 = tape.leaf(w);
    Var loss2 = ops::sum(tape, ops::mul(tape, wv2.re, wv2.re));
    CHECK_NOTHROW(tape.backward(loss2));
  }
}

TEST_CASE("zeroing contract") {
  auto w = Parameter<double>::real(5, "w", Tensor<double>(Shape{2}, {1, 2}));
  Tape<double> tape;
  Var loss = ops::sum(tape, ops::mul(tape, tape.leaf(w).re, tape.leaf(w).re));
  tape.backward(loss);
  CHECK(w.grad_re[0] != 0.0);
  std::vector<Parameter<double>*> params{&w};
  zero_grads(params);
  CHECK(w.grad_re[0] == 0.0);
  CHECK(w.grad_re[1] == 0.0);
}

TEST_CASE("gradient linearity: grad(a L1 + b L2) = a grad(L1) + b grad(L2)") {
  Rng rng(21);
  auto w = Parameter<double>::real(6, "w", Tensor<double>(Shape{4}, {0.3, -0.8, 1.2, 0.5}));
  std::vector<Parameter<double>*> params{&w};
  const double alpha = 1.7, beta = -0.6;

  auto loss1 = [&](Tape<double>& t, TapeVal wv) {
    return ops::sum(t, ops::mul(t, wv.re, wv.re));
  };
  auto loss2 = [&](Tape<double>& t, TapeVal wv) {
    return ops::sum(t, ops::relu(t, wv.re));
  };

  Tensor<double> g1, g2, gc;
  {
    Tape<double> t;
    t.backward(loss1(t, t.leaf(w)));
    g1 = w.grad_re;
    zero_grads(params);
  }
  {
    Tape<double> t;
    t.backward(loss2(t, t.leaf(w)));
    g2 = w.grad_re;
    zero_grads(params);
  }
  {
    Tape<double> t;
    TapeVal wv = t.leaf(w);
    Var combined = ops::add(t, ops::scale(t, loss1(t, wv), alpha), ops::scale(t, loss2(t, wv), beta));
    t.backward(combined);
    gc = w.grad_re;
    zero_grads(params);
  }
  for (int64_t i = 0; i < 4; ++i)
    CHECK(gc[i] == doctest::Approx(alpha * g1[i] + beta * g2[i]).epsilon(1e-6));
}

TEST_CASE("complex parameter counts 2x the real coordinates") {
  auto r = Parameter<double>::real(7, "r", Tensor<double>::zeros(Shape{3, 5}));
  auto c = Parameter<double>::complex(8, "c", Tensor<double>::zeros(Shape{3, 5}),
                                      Tensor<double>::zeros(Shape{3, 5}));
  CHECK(r.coord_count() == 15);
  CHECK(c.coord_count() == 30);
  CHECK(c.coord_count() == 2 * r.coord_count());
}

TEST_CASE("finite differences on a quadratic match analytics to < 1e-7") {
  Rng rng(31);
  auto w = Parameter<double>::real(9, "w", Tensor<double>(Shape{6}));
  for (int64_t i = 0; i < 6; ++i) w.value_re[i] = rng.uniform(-2, 2);
  std::vector<Parameter<double>*> params{&w};

  auto forward = [&]() {
    double acc = 0;
    for (int64_t i = 0; i < 6; ++i)
      acc += (2.0 + static_cast<double>(i)) * w.value_re[i] * w.value_re[i];
    return acc;
  };
  {
    Tape<double> t;
    TapeVal wv = t.leaf(w);
    Tensor<double> coef(Shape{6});
    for (int64_t i = 0; i < 6; ++i) coef[i] = 2.0 + static_cast<double>(i);
    Var loss = ops::sum(t, ops::mul(t, ops::mul(t, wv.re, wv.re), t.constant(coef)));
    t.backward(loss);
  }
  const double err = finite_difference_check<double>(forward, params, 1e-4);
  CHECK(err < 1e-7);
  zero_grads(params);
}

TEST_CASE("finite differences on a constant function report zero error") {
  auto w = Parameter<double>::real(10, "w", Tensor<double>(Shape{2}, {1.0, -1.0}));
  std::vector<Parameter<double>*> params{&w};
  w.zero_grad();  // analytic gradient of a constant is zero
  const double err = finite_difference_check<double>([]() { return 5.0; }, params, 1e-4);
  CHECK(err == 0.0);
}

TEST_CASE("finite_difference_check flags a non-deterministic loss") {
  auto w = Parameter<double>::real(11, "w", Tensor<double>(Shape{1}, {1.0}));
  std::vector<Parameter<double>*> params{&w};
  int calls = 0;
  auto noisy = [&]() { return static_cast<double>(++calls); };
  CHECK_THROWS_AS(finite_difference_check<double>(noisy, params, 1e-4), OracleError);
  CHECK_THROWS_AS(finite_difference_check<double>([]() { return 1.0; }, params, 0.0),
                  ContractError);
}

TEST_CASE("repeated leaf requests reuse one tape variable") {
  auto w = Parameter<double>::real(12, "w", Tensor<double>(Shape{1}, {2.0}));
  Tape<double> tape;
  TapeVal a = tape.leaf(w);
  TapeVal b = tape.leaf(w);
  CHECK(a.re.id == b.re.id);
  // w used twice: L = w * w -> dL/dw = 2w = 4
  Var loss = ops::sum(tape, ops::mul(tape, a.re, b.re));
  tape.backward(loss);
  CHECK(w.grad_re[0] == doctest::Approx(4.0));
}
