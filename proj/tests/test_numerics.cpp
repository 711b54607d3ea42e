#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "csip/numerics.hpp"

#include <cmath>
#include <numeric>

using namespace csip;

TEST_CASE("xoshiro streams are deterministic and decorrelated") {
  Xoshiro256ss a(123, 0), b(123, 0), c(123, 1);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  bool any_diff = false;
  Xoshiro256ss a2(123, 0);
  for (int i = 0; i < 100; ++i) any_diff |= (a2.next() != c.next());
  CHECK(any_diff);
}

TEST_CASE("bounded draws stay in range and shuffles are reproducible") {
  Xoshiro256ss rng(7);
  for (int i = 0; i < 1000; ++i) CHECK(rng.below(18) < 18);
  std::vector<int> v1(50), v2(50);
  std::iota(v1.begin(), v1.end(), 0);
  std::iota(v2.begin(), v2.end(), 0);
  Xoshiro256ss r1(99, 3), r2(99, 3);
  r1.shuffle(v1);
  r2.shuffle(v2);
  CHECK(v1 == v2);
}

TEST_CASE("xavier uniform bound and determinism") {
  const double bound = 0.5 * std::sqrt(6.0 / 12.0);  // 0.3536 for 4 x 8
  const Matrix m = xavier_uniform_init(4, 8, 0.5, 42);
  CHECK(m.rows() == 4);
  CHECK(m.cols() == 8);
  double max_abs = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 8; ++j) max_abs = std::max(max_abs, std::abs(m(i, j)));
  CHECK(max_abs <= bound);
  CHECK(max_abs > 0.5 * bound);  // draws actually spread over the interval

  CHECK(xavier_uniform_init(4, 8, 0.5, 42) == m);
  CHECK(xavier_uniform_init(3, 3, 0.0, 7).isZero());
  CHECK_THROWS_AS(xavier_uniform_init(0, 8, 0.5, 1), std::invalid_argument);
}

TEST_CASE("fan-in uniform bound") {
  const Matrix m = fan_in_uniform_init(5, 4, 11);
  CHECK(m.cwiseAbs().maxCoeff() <= 0.5);
  const Matrix u = fan_in_uniform_init(5, 1, 11);
  CHECK(u.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(u.cwiseAbs().maxCoeff() > 0.5);
  CHECK(fan_in_uniform_init(5, 4, 11) == m);
}

TEST_CASE("grad_check on a quadratic") {
  auto x = make_tensor("x", Matrix::Constant(1, 1, 3.0));
  const TensorPtr params[] = {x};
  const double err = grad_check(
      [&](Tape& t) { return square(t.leaf(x)); }, params, 1e-3);
  CHECK(err <= 1e-6);
}

TEST_CASE("grad_check covers every autodiff op") {
  Xoshiro256ss rng(5);
  auto W = make_tensor("W", xavier_uniform(3, 4, 1.0, rng));
  auto x = make_tensor("x", xavier_uniform(4, 1, 1.0, rng));
  auto y = make_tensor("y", xavier_uniform(3, 1, 1.0, rng));
  auto table = make_tensor("table", xavier_uniform(6, 4, 1.0, rng));
  const TensorPtr params[] = {W, x, y, table};

  const std::vector<int> idx = {0, 2, 2, 5};
  auto build = [&](Tape& t) {
    Var wx = matvec(t.leaf(W), t.leaf(x));                 // 3-vec
    Var s = sigmoid(add(wx, t.leaf(y)));                   // sigmoid, add
    Var e = vexp(scale(s, 0.5));                           // exp, scale
    Var m = mul(e, sub(s, t.leaf(y)));                     // mul, sub
    Var emb = rows_mean(t.leaf(table), idx);               // 4-vec
    Var cat = concat(m, emb);                              // 7-vec
    Var p = pick(cat, 4);                                  // scalar
    Var bce = sum(bce_with_logits(cat, 1.0));              // bce
    Var sce = softmax_cross_entropy(cat, 2);               // softmax ce
    return add(add(mean(square(cat)), p), add(bce, sce));
  };
  CHECK(grad_check(build, params, 1e-4) <= 1e-6);
}

TEST_CASE("grad_check rejects non-finite forwards") {
  auto x = make_tensor("x", Matrix::Constant(1, 1, 1000.0));
  const TensorPtr params[] = {x};
  CHECK_THROWS_AS(grad_check([&](Tape& t) { return vexp(t.leaf(x)); }, params, 1e-3),
                  NumericFailure);
}

TEST_CASE("clip_global_norm scales by the joint norm") {
  auto a = make_tensor("a", Matrix::Zero(3, 1));
  auto b = make_tensor("b", Matrix::Zero(4, 1));
  a->grad << 3.0, 0.0, 0.0;
  b->grad << 0.0, 4.0, 0.0, 0.0;
  const TensorPtr params[] = {a, b};
  clip_global_norm(params, 1.0);
  CHECK(a->grad(0, 0) == doctest::Approx(3.0 / 5.0).epsilon(1e-12));
  CHECK(b->grad(1, 0) == doctest::Approx(4.0 / 5.0).epsilon(1e-12));

  // Idempotence: a second application leaves the already-clipped
  // gradients untouched up to float error.
  const Matrix a_before = a->grad;
  clip_global_norm(params, 1.0);
  CHECK((a->grad - a_before).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("clip_global_norm leaves small and zero gradients alone") {
  auto a = make_tensor("a", Matrix::Zero(2, 1));
  a->grad << 0.3, 0.4;  // norm 0.5
  const TensorPtr params[] = {a};
  clip_global_norm(params, 1.0);
  CHECK(a->grad(0, 0) == 0.3);

  auto z = make_tensor("z", Matrix::Zero(2, 1));
  const TensorPtr zp[] = {z};
  clip_global_norm(zp, 1.0);
  CHECK(z->grad.isZero());
}

TEST_CASE("dropout masks scale kept entries and are stream-reproducible") {
  auto x = make_tensor("x", Matrix::Ones(100, 1));
  Xoshiro256ss r1(3, stream::kDropout), r2(3, stream::kDropout);
  Tape t1, t2;
  Var d1 = dropout(t1.leaf(x), 0.25, r1);
  Var d2 = dropout(t2.leaf(x), 0.25, r2);
  CHECK(t1.value(d1) == t2.value(d2));
  int zeros = 0;
  for (int i = 0; i < 100; ++i) {
    const double v = t1.value(d1)(i, 0);
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    zeros += v == 0.0;
  }
  CHECK(zeros > 5);
  CHECK(zeros < 60);
}

TEST_CASE("backward accumulates into shared parameters") {
  auto x = make_tensor("x", Matrix::Constant(1, 1, 2.0));
  Tape t;
  Var leaf = t.leaf(x);
  Var loss = add(square(leaf), scale(leaf, 3.0));  // x^2 + 3x -> d/dx = 2x + 3
  t.backward(loss);
  CHECK(x->grad(0, 0) == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(x->touched);
}
