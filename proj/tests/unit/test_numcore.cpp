#include <doctest.h>

#include <cmath>
#include <string>

#include "fixtures.hpp"
#include "wildflow/errors.hpp"
#include "wildflow/optim.hpp"
#include "wildflow/rng.hpp"
#include "wildflow/tape.hpp"

using namespace wildflow;
using fixtures::max_gradient_error;
using fixtures::random_tensor;

TEST_CASE("tensor shape must match data length") {
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), InvalidArgument);
  const Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t(1, 2) == 1.5);
  CHECK(Tensor::scalar(4).item() == 4);
  CHECK_THROWS_AS(t.item(), InvalidArgument);
}

TEST_CASE("matmul forward and shape errors") {
  Tape tape;
  const Var a = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  const Var b = tape.constant(Tensor::matrix({{1}, {1}}));
  CHECK(tape.value(matmul(tape, a, b)) == Tensor::matrix({{3}, {7}}));
  const Var c = tape.constant(Tensor({3, 1}));
  try {
    matmul(tape, a, c);
    FAIL("expected a shape error");
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x2]") != std::string::npos);
    CHECK(msg.find("[3x1]") != std::string::npos);
  }
}

TEST_CASE("sigmoid at zero has adjoint one quarter") {
  Tape tape;
  const Var x = tape.parameter(Tensor::scalar(0.0));
  const Var y = sigmoid(tape, x);
  CHECK(tape.value(y).item() == 0.5);
  tape.backward(y);
  CHECK(tape.grad(x).item() == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("clip saturates with zero adjoint") {
  Tape tape;
  const Var x = tape.parameter(Tensor::row({12.0, 3.0, -11.0}));
  const Var y = clip(tape, x, 10.0);
  CHECK(tape.value(y) == Tensor::row({10.0, 3.0, -10.0}));
  tape.backward(sum(tape, y));
  CHECK(tape.grad(x) == Tensor::row({0.0, 1.0, 0.0}));
}

TEST_CASE("sum of squares gradient") {
  Tape tape;
  const Var p = tape.parameter(Tensor::row({1, 2, 3}));
  tape.backward(sum(tape, mul(tape, p, p)));
  CHECK(tape.grad(p) == Tensor::row({2, 4, 6}));
}

TEST_CASE("sigmoid of w x at w=0") {
  Tape tape;
  const Var w = tape.parameter(Tensor::scalar(0.0));
  const Var x = tape.constant(Tensor::scalar(1.0));
  tape.backward(sigmoid(tape, matmul(tape, w, x)));
  CHECK(tape.grad(w).item() == doctest::Approx(0.25));
}

TEST_CASE("every primitive matches finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t r = 1 + rng.below(4), c = 1 + rng.below(4), k = 1 + rng.below(4);
    const Tensor weights = random_tensor({r, c}, rng);
    auto reduce = [&](Tape& t, Var v) { return sum(t, mul(t, v, t.constant(weights))); };
    CAPTURE(trial);
    CHECK(max_gradient_error([&](Tape& t, const std::vector<Var>& v) { return reduce(t, add(t, v[0], v[1])); },
                             {random_tensor({r, c}, rng), random_tensor({r, c}, rng)}) < 1e-5);
    CHECK(max_gradient_error([&](Tape& t, const std::vector<Var>& v) { return reduce(t, sub(t, v[0], v[1])); },
                             {random_tensor({r, c}, rng), random_tensor({r, c}, rng)}) < 1e-5);
    CHECK(max_gradient_error([&](Tape& t, const std::vector<Var>& v) { return reduce(t, mul(t, v[0], v[1])); },
                             {random_tensor({r, c}, rng), random_tensor({r, c}, rng)}) < 1e-5);
    CHECK(max_gradient_error([&](Tape& t, const std::vector<Var>& v) { return reduce(t, matmul(t, v[0], v[1])); },
                             {random_tensor({r, k}, rng), random_tensor({k, c}, rng)}) < 1e-5);
    CHECK(max_gradient_error([&](Tape& t, const std::vector<Var>& v) { return reduce(t, scale(t, v[0], -1.7)); },
                             {random_tensor({r, c}, rng)}) < 1e-5);
    CHECK(max_gradient_error([&](Tape& t, const std::vector<Var>& v) { return reduce(t, add_bias(t, v[0], v[1])); },
                             {random_tensor({r, c}, rng), random_tensor({1, c}, rng)}) < 1e-5);
    CHECK(max_gradient_error([&](Tape& t, const std::vector<Var>& v) { return mean(t, mul(t, v[0], v[0])); },
                             {random_tensor({r, c}, rng)}) < 1e-5);
    CHECK(max_gradient_error([&](Tape& t, const std::vector<Var>& v) { return reduce(t, sigmoid(t, v[0])); },
                             {random_tensor({r, c}, rng, 2.0)}) < 1e-5);
    CHECK(max_gradient_error([&](Tape& t, const std::vector<Var>& v) { return reduce(t, relu(t, v[0])); },
                             {random_tensor({r, c}, rng)}) < 1e-5);
    CHECK(max_gradient_error([&](Tape& t, const std::vector<Var>& v) { return reduce(t, clip(t, v[0], 0.8)); },
                             {random_tensor({r, c}, rng)}) < 1e-5);
    CHECK(max_gradient_error(
              [&](Tape& t, const std::vector<Var>& v) {
                const Var joined = concat_cols(t, {v[0], v[1]});
                return sum(t, mul(t, slice_cols(t, joined, 1, c + 1), t.constant(weights)));
              },
              {random_tensor({r, 1}, rng), random_tensor({r, c}, rng)}) < 1e-5);
    CHECK(max_gradient_error([&](Tape& t, const std::vector<Var>& v) { return squared_error(t, v[0], v[1]); },
                             {random_tensor({r, c}, rng), random_tensor({r, c}, rng)}) < 1e-5);
  }
}

TEST_CASE("random three-layer composite matches finite differences") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(6), d = 1 + rng.below(5), h = 1 + rng.below(8);
    const Tensor x = random_tensor({n, d}, rng);
    auto build = [&](Tape& t, const std::vector<Var>& v) {
      Var a = relu(t, add_bias(t, matmul(t, t.constant(x), v[0]), v[1]));
      a = sigmoid(t, matmul(t, a, v[2]));
      return mean(t, mul(t, a, a));
    };
    CAPTURE(trial);
    CHECK(max_gradient_error(build, {random_tensor({d, h}, rng), random_tensor({1, h}, rng),
                                     random_tensor({h, 1}, rng)}) < 1e-5);
  }
}

TEST_CASE("backward visits each node once in reverse order") {
  Tape tape;
  std::vector<int> order;
  const Var x = tape.parameter(Tensor::scalar(2.0));
  auto tag = [&](Var in, int id) {
    return tape.record(tape.value(in), {in}, [&order, in, id](Tape& t, const Tensor& up) {
      order.push_back(id);
      t.accumulate(in, up);
    });
  };
  const Var a = tag(x, 1);
  const Var b = tag(a, 2);
  const Var c = tag(b, 3);
  tape.backward(c);
  CHECK(order == std::vector<int>{3, 2, 1});
  CHECK(tape.grad(x).item() == 1.0);
}

TEST_CASE("backward is linear in the seed") {
  Rng rng(9);
  const Tensor w = random_tensor({3, 2}, rng);
  Tape t1, t2;
  const Var a1 = t1.parameter(w), a2 = t2.parameter(w);
  t1.backward(sum(t1, sigmoid(t1, a1)));
  t2.backward(sum(t2, sigmoid(t2, a2)), 3.5);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(t2.grad(a2)[i] == doctest::Approx(3.5 * t1.grad(a1)[i]));
}

TEST_CASE("stable sigmoid and softplus") {
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) >= 0.0);
  CHECK(std::isfinite(softplus(1000.0)));
  CHECK(softplus(1000.0) == doctest::Approx(1000.0));
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("finite difference oracle") {
  auto sq = [](std::span<const double> t) { return t[0] * t[0]; };
  const std::vector<double> three{3.0};
  CHECK(std::abs(finite_diff_grad(sq, three)[0] - 6.0) < 1e-8);
  auto sine = [](std::span<const double> t) { return std::sin(t[0]); };
  const std::vector<double> zero{0.0};
  CHECK(std::abs(finite_diff_grad(sine, zero)[0] - 1.0) < 1e-9);
}

TEST_CASE("AdamW with zero gradient and no decay is the identity") {
  AdamW opt({.lr = 0.1});
  Tensor theta = Tensor::row({1.0, -2.0, 3.0});
  const Tensor before = theta;
  Tensor* params[] = {&theta};
  const Tensor grads[] = {Tensor({1, 3})};
  for (int k = 0; k < 50; ++k) opt.step(params, grads);
  CHECK(theta == before);
  CHECK(opt.step_count() == 50);
}

TEST_CASE("AdamW first step moves by lr times the gradient sign") {
  AdamW opt({.lr = 0.1});
  Tensor theta = Tensor::scalar(1.0);
  Tensor* params[] = {&theta};
  const Tensor grads[] = {Tensor::scalar(1.0)};  // d/dtheta theta^2/2 at 1
  opt.step(params, grads);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
  CHECK(theta.item() == doctest::Approx(1.0 - 0.1 * 1.0 / (1.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("AdamW decay-only step") {
  AdamW opt({.lr = 0.01, .weight_decay = 0.1});
  Tensor theta = Tensor::row({2.0, -4.0});
  Tensor* params[] = {&theta};
  const Tensor grads[] = {Tensor({1, 2})};
  opt.step(params, grads);
  CHECK(theta[0] == doctest::Approx(2.0 * (1 - 0.001)).epsilon(1e-15));
  CHECK(theta[1] == doctest::Approx(-4.0 * (1 - 0.001)).epsilon(1e-15));
}

TEST_CASE("AdamW rejects non-finite gradients without touching parameters") {
  AdamW opt;
  Tensor theta = Tensor::row({1.0, 2.0});
  Tensor* params[] = {&theta};
  const Tensor good[] = {Tensor::row({0.1, 0.1})};
  const Tensor bad[] = {Tensor::row({0.1, std::nan("")})};
  opt.step(params, good);
  const Tensor before = theta;
  try {
    opt.step(params, bad);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.step() == 2);
  }
  CHECK(theta == before);
}

TEST_CASE("gradient norm clipping") {
  std::vector<Tensor> g{Tensor::row({3.0}), Tensor::row({0.0})};
  CHECK(clip_grad_norm(g, 5.0) == 3.0);
  CHECK(g[0].item() == 3.0);

  std::vector<Tensor> boundary{Tensor::row({3.0, 4.0})};
  CHECK(clip_grad_norm(boundary, 5.0) == 5.0);
  CHECK(boundary[0] == Tensor::row({3.0, 4.0}));

  std::vector<Tensor> big{Tensor::row({6.0}), Tensor::row({8.0})};
  CHECK(clip_grad_norm(big, 5.0) == 10.0);
  CHECK(big[0].item() == doctest::Approx(3.0));
  CHECK(big[1].item() == doctest::Approx(4.0));
}

TEST_CASE("clipping never increases the norm and keeps direction") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tensor> g{random_tensor({2, 3}, rng, 4.0), random_tensor({1, 5}, rng, 4.0)};
    const std::vector<Tensor> original = g;
    const double before = global_norm(g);
    clip_grad_norm(g, 5.0);
    const double after = global_norm(g);
    CHECK(after <= before + 1e-12);
    CHECK(after <= 5.0 + 1e-12);
    const double ratio = after / before;
    for (std::size_t k = 0; k < g.size(); ++k)
      for (std::size_t i = 0; i < g[k].size(); ++i) CHECK(g[k][i] == doctest::Approx(ratio * original[k][i]));
  }
}

TEST_CASE("rng streams are reproducible and well formed") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(1);
  double sum = 0, sumsq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = c.normal();
    sum += z;
    sumsq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sumsq / n - 1.0) < 0.01);
  double esum = 0;
  for (int i = 0; i < n; ++i) esum += c.exponential(2.0);
  CHECK(std::abs(esum / n - 2.0) < 0.03);
  double psum = 0;
  for (int i = 0; i < n; ++i) psum += c.poisson(1.5);
  CHECK(std::abs(psum / n - 1.5) < 0.02);
  for (int i = 0; i < 1000; ++i) CHECK(c.below(5) < 5);
  CHECK(derive_seed(3, 101) != derive_seed(3, 102));
}
