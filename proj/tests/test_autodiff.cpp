#include "doctest.h"

#include "dpcc/autodiff.hpp"
#include "dpcc/geometry.hpp"
#include "gradcheck.hpp"

#include <cmath>

using namespace dpcc;
using namespace dpcc::nn;

TEST_CASE("forward values of the elementwise ops") {
  Mat a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  CHECK(add(constant(a), constant(b))->value(1, 1) == 12);
  CHECK(sub(constant(a), constant(b))->value(0, 0) == -4);
  CHECK(mul(constant(a), constant(b))->value(1, 0) == 21);
  CHECK(div(constant(b), constant(a))->value(0, 1) == 3);
  CHECK(neg(constant(a))->value(0, 0) == -1);
  CHECK(add_scalar(constant(a), 0.5)->value(0, 0) == 1.5);
  CHECK(mul_scalar(constant(a), 2.0)->value(1, 1) == 8);
  CHECK(square(constant(a))->value(1, 0) == 9);
  CHECK(transpose(constant(a))->value(0, 1) == 3);
}

TEST_CASE("broadcast semantics of the right operand") {
  Mat a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  Mat row(1, 3);
  row << 10, 20, 30;
  Mat col(2, 1);
  col << 100, 200;
  Mat sc(1, 1);
  sc << 7;

  CHECK(add(constant(a), constant(row))->value(1, 2) == 36);
  CHECK(add(constant(a), constant(col))->value(1, 0) == 204);
  CHECK(add(constant(a), constant(sc))->value(0, 0) == 8);

  Mat bad(3, 1);
  bad << 1, 2, 3;
  CHECK_THROWS_AS(add(constant(a), constant(bad)), Error);
}

TEST_CASE("reductions and shape ops forward") {
  Mat a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  CHECK(sum_all(constant(a))->value(0, 0) == 21);
  CHECK(mean_all(constant(a))->value(0, 0) == doctest::Approx(3.5));
  CHECK(mean_rows(constant(a))->value(0, 1) == doctest::Approx(3.5));
  CHECK(row_sum(constant(a))->value(1, 0) == 15);
  CHECK(slice_cols(constant(a), 1, 2)->value(0, 0) == 2);

  Mat b(2, 1);
  b << 9, 10;
  auto cc = concat_cols(constant(a), constant(b));
  CHECK(cc->value.cols() == 4);
  CHECK(cc->value(1, 3) == 10);

  auto g = gather_rows(constant(a), {1, 0, 1});
  CHECK(g->value.rows() == 3);
  CHECK(g->value(0, 0) == 4);
  CHECK(g->value(2, 2) == 6);
}

TEST_CASE("group_max forward and tie handling") {
  Mat a(4, 2);
  a << 1, 5, 3, 5, 7, 0, 7, 2;
  auto v = group_max(constant(a), 2);
  CHECK(v->value(0, 0) == 3);
  CHECK(v->value(0, 1) == 5);
  CHECK(v->value(1, 0) == 7);
  CHECK(v->value(1, 1) == 2);

  // tie in column 1 of group 0 and column 0 of group 1: grad goes to the
  // lowest row of the group
  ParameterStore ps;
  Var x = ps.create("x", a);
  backward(sum_all(group_max(x, 2)));
  CHECK(x->grad(0, 1) == 1.0);
  CHECK(x->grad(1, 1) == 0.0);
  CHECK(x->grad(2, 0) == 1.0);
  CHECK(x->grad(3, 0) == 0.0);

  CHECK_THROWS_AS(group_max(constant(a), 3), Error);
}

TEST_CASE("layer_norm forward: zero mean, unit variance per row") {
  Rng rng(7);
  Mat a = rng.normal_mat(5, 16);
  a *= 3.0;
  auto y = layer_norm(constant(a));
  for (int i = 0; i < 5; ++i) {
    CHECK(y->value.row(i).mean() == doctest::Approx(0.0).epsilon(1e-10));
    double var = (y->value.row(i).array() - y->value.row(i).mean()).square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("softmax_rows forward: rows sum to one, monotone in logits") {
  Mat a(2, 3);
  a << 0, 1, 2, -5, 0, 5;
  auto y = softmax_rows(constant(a));
  for (int i = 0; i < 2; ++i) CHECK(y->value.row(i).sum() == doctest::Approx(1.0));
  CHECK(y->value(0, 2) > y->value(0, 1));
  CHECK(y->value(1, 2) > 0.99);
}

TEST_CASE("gradients: every unary op against central differences") {
  Rng rng(21);
  auto check_unary = [&](const std::function<Var(const Var&)>& f, double lo, double hi) {
    ParameterStore ps;
    Var x = ps.create("x", rng.uniform_mat(3, 4, lo, hi));
    auto loss = [&] { return mean_all(square(add_scalar(f(x), 0.25))); };
    return testsupport::max_grad_error(ps, loss);
  };

  CHECK(check_unary([](const Var& v) { return silu(v); }, -2, 2) < 1e-7);
  CHECK(check_unary([](const Var& v) { return sigmoid(v); }, -2, 2) < 1e-7);
  CHECK(check_unary([](const Var& v) { return nn::tanh(v); }, -2, 2) < 1e-7);
  CHECK(check_unary([](const Var& v) { return softplus(v); }, -2, 2) < 1e-7);
  CHECK(check_unary([](const Var& v) { return nn::exp(v); }, -1, 1) < 1e-7);
  CHECK(check_unary([](const Var& v) { return nn::log(v); }, 0.2, 3) < 1e-7);
  CHECK(check_unary([](const Var& v) { return nn::erf(v); }, -2, 2) < 1e-7);
  CHECK(check_unary([](const Var& v) { return square(v); }, -2, 2) < 1e-7);
  CHECK(check_unary([](const Var& v) { return neg(v); }, -2, 2) < 1e-7);
  CHECK(check_unary([](const Var& v) { return mul_scalar(v, -1.7); }, -2, 2) < 1e-7);
  CHECK(check_unary([](const Var& v) { return add_scalar(v, 0.3); }, -2, 2) < 1e-7);
  CHECK(check_unary([](const Var& v) { return transpose(v); }, -2, 2) < 1e-7);
  // keep inputs away from the clamp kink so the derivative is defined
  CHECK(check_unary([](const Var& v) { return clamp_min(v, 0.0); }, 0.3, 2) < 1e-7);
  CHECK(check_unary([](const Var& v) { return clamp_min(v, 5.0); }, -2, 2) < 1e-7);
}

TEST_CASE("gradients: binary ops with every broadcast form") {
  Rng rng(22);
  auto check_binary = [&](const std::function<Var(const Var&, const Var&)>& f, int br, int bc) {
    ParameterStore ps;
    Var a = ps.create("a", rng.uniform_mat(3, 4, 0.5, 2.0));
    Var b = ps.create("b", rng.uniform_mat(br, bc, 0.5, 2.0));
    auto loss = [&] { return mean_all(square(f(a, b))); };
    return testsupport::max_grad_error(ps, loss);
  };

  for (auto [r, c] : std::vector<std::pair<int, int>>{{3, 4}, {1, 4}, {3, 1}, {1, 1}}) {
    CAPTURE(r);
    CAPTURE(c);
    CHECK(check_binary([](const Var& x, const Var& y) { return add(x, y); }, r, c) < 1e-7);
    CHECK(check_binary([](const Var& x, const Var& y) { return sub(x, y); }, r, c) < 1e-7);
    CHECK(check_binary([](const Var& x, const Var& y) { return mul(x, y); }, r, c) < 1e-7);
    CHECK(check_binary([](const Var& x, const Var& y) { return div(x, y); }, r, c) < 1e-7);
  }
}

TEST_CASE("gradients: matmul, reductions, shape ops, fused layers") {
  Rng rng(23);

  ParameterStore ps;
  Var W = ps.create("W", rng.uniform_mat(4, 5, -1, 1));
  Var x = ps.create("x", rng.uniform_mat(3, 4, -1, 1));
  Var b = ps.create("b", rng.uniform_mat(1, 5, -1, 1));

  CHECK(testsupport::max_grad_error(ps, [&] { return mean_all(square(linear(x, W, b))); }) <
        1e-7);
  CHECK(testsupport::max_grad_error(ps, [&] {
          return sum_all(square(softmax_rows(linear(x, W, b))));
        }) < 1e-7);
  CHECK(testsupport::max_grad_error(ps, [&] {
          return mean_all(square(layer_norm(linear(x, W, b))));
        }) < 1e-6);
  CHECK(testsupport::max_grad_error(ps, [&] {
          Var h = linear(x, W, b);
          Var g = gather_rows(h, {2, 0, 0, 1});
          Var m = group_max(g, 2);
          Var s = slice_cols(concat_cols(m, square(m)), 2, 6);
          return add(mean_all(s), mul_scalar(sum_all(row_sum(h)), 0.01));
        }) < 1e-7);
  CHECK(testsupport::max_grad_error(ps, [&] {
          Var y = matmul(transpose(W), transpose(x));  // both operands on tape
          return add(mean_all(square(y)), mean_all(mean_rows(square(x))));
        }) < 1e-7);
}

TEST_CASE("gradients: a node consumed twice accumulates both paths") {
  Rng rng(24);
  ParameterStore ps;
  Var x = ps.create("x", rng.uniform_mat(2, 3, -1, 1));
  auto loss = [&] { return add(sum_all(mul(x, x)), mean_all(mul_scalar(x, 3.0))); };
  CHECK(testsupport::max_grad_error(ps, loss) < 1e-8);

  ps.zero_grad();
  Var l = loss();
  backward(l);
  // dL/dx = 2x + 3/6
  Mat want = 2.0 * x->value + Mat::Constant(2, 3, 0.5);
  CHECK((x->grad - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward is deterministic across repeated runs") {
  Rng rng(25);
  ParameterStore ps;
  Var W = ps.create("W", rng.uniform_mat(6, 6, -1, 1));
  Var x = ps.create("x", rng.uniform_mat(4, 6, -1, 1));
  auto loss = [&] {
    Var h = silu(matmul(x, W));
    return mean_all(square(softmax_rows(h)));
  };
  ps.zero_grad();
  backward(loss());
  Mat g1 = W->grad;
  ps.zero_grad();
  backward(loss());
  CHECK((g1 - W->grad).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("NoGradGuard suppresses graph construction") {
  ParameterStore ps;
  Var x = ps.create("x", Mat::Ones(2, 2));
  NoGradGuard ng;
  Var y = mean_all(square(x));
  CHECK_FALSE(y->requires_grad);
  CHECK(y->parents.empty());
  CHECK_THROWS_AS(backward(y), Error);
}

TEST_CASE("backward rejects non-scalar losses") {
  ParameterStore ps;
  Var x = ps.create("x", Mat::Ones(2, 2));
  CHECK_THROWS_AS(backward(square(x)), Error);
}

TEST_CASE("parameter store bookkeeping") {
  ParameterStore ps;
  ps.create("a", Mat::Zero(2, 3));
  ps.create("b", Mat::Zero(4, 1));
  CHECK(ps.total_size() == 10);
  CHECK(ps.has("a"));
  CHECK_FALSE(ps.has("c"));
  CHECK_THROWS_AS(ps.create("a", Mat::Zero(1, 1)), Error);
  CHECK_THROWS_AS(ps.get("zzz"), Error);
  CHECK(ps.entries()[1].first == "b");
}

TEST_CASE("adam: first step moves by lr in the gradient sign direction") {
  ParameterStore ps;
  Mat init(1, 3);
  init << 1.0, -2.0, 0.5;
  Var x = ps.create("x", init);
  Adam opt(ps, 0.01);

  ps.zero_grad();
  backward(sum_all(mul(x, constant((Mat(1, 3) << 3.0, -0.2, 5.0).finished()))));
  opt.step();
  // bias-corrected first step reduces exactly to lr * sign(g) up to eps
  CHECK(x->value(0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(x->value(0, 1) == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(x->value(0, 2) == doctest::Approx(0.5 - 0.01).epsilon(1e-6));
}

TEST_CASE("adam: drives a quadratic to its minimum") {
  ParameterStore ps;
  Var x = ps.create("x", Mat::Constant(1, 4, 5.0));
  Mat target(1, 4);
  target << 1, -1, 2, 0;
  Adam opt(ps, 0.05);
  for (int i = 0; i < 2000; ++i) {
    ps.zero_grad();
    backward(mean_all(square(sub(x, constant(target)))));
    opt.step();
  }
  CHECK((x->value - target).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("adam: missing gradient acts as a zero gradient") {
  ParameterStore ps;
  Var used = ps.create("used", Mat::Ones(1, 2));
  Var unused = ps.create("unused", Mat::Ones(1, 2));
  Adam opt(ps, 0.01);
  ps.zero_grad();
  backward(sum_all(square(used)));
  opt.step();
  CHECK((unused->value - Mat::Ones(1, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((used->value - Mat::Ones(1, 2)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("glorot init stays inside the fan limit") {
  Rng rng(26);
  Mat w = glorot(30, 50, rng);
  double limit = std::sqrt(6.0 / 80.0);
  CHECK(w.cwiseAbs().maxCoeff() <= limit);
  CHECK(w.cwiseAbs().maxCoeff() > 0.5 * limit);
  CHECK(std::abs(w.mean()) < 0.05);
}

TEST_CASE("reshape: row-major relayout with gradient flow") {
  Mat a(2, 6);
  a << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11;
  Var r = reshape(constant(a), 3, 4);
  CHECK(r->value(0, 3) == 3);
  CHECK(r->value(1, 0) == 4);
  CHECK(r->value(2, 3) == 11);
  CHECK_THROWS_AS(reshape(constant(a), 5, 2), Error);

  Rng rng(27);
  ParameterStore ps;
  Var x = ps.create("x", rng.normal_mat(2, 6));
  Mat w = rng.normal_mat(4, 1);
  auto loss = [&] { return sum_all(square(matmul(reshape(x, 3, 4), constant(w)))); };
  CHECK(testsupport::max_grad_error(ps, loss) < 1e-7);
}

TEST_CASE("chamfer: value matches the geometry routine, gradients pass FD") {
  Rng rng(28);
  Mat a = rng.normal_mat(9, 3);
  Mat b = rng.normal_mat(7, 3);
  {
    NoGradGuard ng;
    Var d = chamfer(constant(a), constant(b));
    CHECK(d->value(0, 0) ==
          doctest::Approx(chamfer_distance(a, b)).epsilon(1e-12));
    CHECK(chamfer(constant(a), constant(a))->value(0, 0) == doctest::Approx(0.0));
  }

  ParameterStore ps;
  Var va = ps.create("a", a);
  Var vb = ps.create("b", b);
  auto loss = [&] { return chamfer(va, vb); };
  CHECK(testsupport::max_grad_error(ps, loss) < 1e-6);

  ParameterStore ps2;
  Var one_sided = ps2.create("a", a);
  auto loss2 = [&] { return chamfer(one_sided, constant(b)); };
  CHECK(testsupport::max_grad_error(ps2, loss2) < 1e-6);
}
