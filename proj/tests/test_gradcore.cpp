#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "ntm/gradcheck.hpp"
#include "ntm/tape.hpp"
#include "ntm/tensor.hpp"
#include "support/test_util.hpp"

using namespace ntm;
using testutil::random_in;
using testutil::weigh;

TEST_SUITE("gradcore") {

TEST_CASE("tensor rejects inconsistent shapes") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(Tensor({0, 3}), DimensionError);
  CHECK(Tensor({2, 3}).numel() == 6);
}

TEST_CASE("matmul: identity, zero, and a hand-expanded product") {
  Tape t;
  const Var eye = t.constant(Tensor({2, 2}, {1, 0, 0, 1}));
  const Var a = t.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  const Tensor& ia = matmul(eye, a).value();
  for (int i = 0; i < 4; ++i) CHECK(ia[i] == a.value()[i]);

  const Var z = t.constant(Tensor({2, 2}));
  const Tensor& az = matmul(eye, z).value();
  for (int i = 0; i < 4; ++i) CHECK(az[i] == 0.0);

  const Var b = t.constant(Tensor({2, 1}, {5, 6}));
  const Tensor& ab = matmul(a, b).value();
  CHECK(ab.shape() == std::vector<std::size_t>{2, 1});
  CHECK(ab[0] == 17.0);
  CHECK(ab[1] == 39.0);
}

TEST_CASE("matmul names both shapes on mismatch") {
  Tape t;
  const Var a = t.constant(Tensor({2, 3}));
  const Var b = t.constant(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("softmax rows: uniform zeros, saturation, ln-ratio oracle") {
  Tape t;
  const Tensor& u = softmax_rows(t.constant(Tensor({1, 4}))).value();
  for (int i = 0; i < 4; ++i) CHECK(u[i] == doctest::Approx(0.25).epsilon(1e-14));

  const Tensor& s =
      softmax_rows(t.constant(Tensor({1, 2}, {1000.0, 0.0}))).value();
  CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  const Tensor& p =
      softmax_rows(t.constant(Tensor({1, 2}, {std::log(1.0), std::log(3.0)})))
          .value();
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and shrug off constant shifts") {
  Rng rng(21);
  Tape t;
  const Tensor x = random_in({5, 7}, rng, -3.0, 3.0);
  Tensor shifted = x;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 7; ++j) shifted.at(i, j) += 10.0 * (i + 1);
  const Tensor& y = softmax_rows(t.constant(x)).value();
  const Tensor& ys = softmax_rows(t.constant(shifted)).value();
  for (std::size_t i = 0; i < 5; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 7; ++j) {
      row += y.at(i, j);
      CHECK(y.at(i, j) == doctest::Approx(ys.at(i, j)).epsilon(1e-12));
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sigmoid: symmetry point, saturation, ln-ratio oracle") {
  Tape t;
  const Tensor& y = sigmoid(t.constant(Tensor({3}, {0.0, -1000.0, std::log(3.0)})))
                        .value();
  CHECK(y[0] == 0.5);
  CHECK(y[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(std::isfinite(y[1]));
  CHECK(y[2] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("backward: linear loss gives all-ones gradient") {
  Tape t;
  const Var w = t.leaf(Tensor({3, 2}, {1, 2, 3, 4, 5, 6}), true);
  t.backward(sum_all(w));
  for (int i = 0; i < 6; ++i) CHECK(w.grad()[i] == 1.0);
}

TEST_CASE("backward: zero-scaled loss zeroes every gradient") {
  Rng rng(22);
  Tape t;
  const Var w = t.leaf(random_in({4, 4}, rng), true);
  t.backward(scale(sum_all(exp(w)), 0.0));
  for (int i = 0; i < 16; ++i) CHECK(w.grad()[i] == 0.0);
}

TEST_CASE("backward: sigmoid slope at zero is a quarter") {
  // loss = sigmoid(w)·v at w=0 → dw = 0.25·v
  const double v = 3.0;
  Tape t;
  const Var w = t.leaf(Tensor::scalar(0.0), true);
  t.backward(scale(sigmoid(w), v));
  CHECK(w.grad()[0] == doctest::Approx(0.25 * v).epsilon(1e-12));

  // same loss through central differences, h = 1e-5
  const double err = grad_check(
      [v](Tape& tp, const std::vector<Var>& xs) {
        return scale(sigmoid(xs[0]), v);
      },
      Tensor::scalar(0.0), 1e-5);
  CHECK(err < 1e-8);
}

TEST_CASE("backward contract: scalar loss only, once per tape") {
  Tape t;
  const Var w = t.leaf(Tensor({2, 2}, {1, 2, 3, 4}), true);
  CHECK_THROWS_AS(t.backward(w), ContractError);
  const Var loss = sum_all(w);
  t.backward(loss);
  CHECK_THROWS_AS(t.backward(loss), StateError);
  t.reset();
  CHECK(t.size() == 0);
}

TEST_CASE("gradients are unavailable before backward") {
  Tape t;
  const Var w = t.leaf(Tensor::scalar(1.0), true);
  CHECK_THROWS_AS((void)w.grad(), StateError);
}

TEST_CASE("trainable leaves untouched by the loss still get zero grads") {
  Tape t;
  const Var used = t.leaf(Tensor::scalar(2.0), true);
  const Var unused = t.leaf(Tensor({2, 2}, {1, 1, 1, 1}), true);
  t.backward(scale(used, 5.0));
  CHECK(used.grad()[0] == 5.0);
  for (int i = 0; i < 4; ++i) CHECK(unused.grad()[i] == 0.0);
}

TEST_CASE("grad_check: exact quadratic and constant functions") {
  Rng rng(23);
  const double err = grad_check(
      [](Tape& tp, const std::vector<Var>& xs) {
        return sum_all(mul(xs[0], xs[0]));
      },
      random_in({3, 3}, rng), 1e-5);
  CHECK(err < 1e-8);

  const double cerr = grad_check(
      [](Tape& tp, const std::vector<Var>& xs) {
        return scale(sum_all(xs[0]), 0.0);
      },
      random_in({2, 2}, rng), 1e-5);
  CHECK(cerr == 0.0);
}

TEST_CASE("grad_check rejects an out-of-range step") {
  CHECK_THROWS_AS(grad_check([](Tape& tp, const std::vector<Var>& xs)
                                 { return sum_all(xs[0]); },
                             Tensor::scalar(1.0), 0.0),
                  ContractError);
  CHECK_THROWS_AS(grad_check([](Tape& tp, const std::vector<Var>& xs)
                                 { return sum_all(xs[0]); },
                             Tensor::scalar(1.0), 0.1),
                  ContractError);
}

TEST_CASE("every primitive passes a finite-difference sweep") {
  Rng rng(24);
  const double h = 1e-5;
  const double tol = 1e-4;

  auto sweep = [&](const char* name, const GradCheckFn& f,
                   std::vector<Tensor> point) {
    INFO("primitive: " << name);
    CHECK(grad_check(f, point, h) < tol);
  };

  sweep("matmul",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, matmul(xs[0], xs[1]));
        },
        {random_in({3, 4}, rng), random_in({4, 2}, rng)});
  sweep("transpose",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, transpose(xs[0]));
        },
        {random_in({3, 5}, rng)});
  sweep("add",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, add(xs[0], xs[1]));
        },
        {random_in({2, 3}, rng), random_in({2, 3}, rng)});
  sweep("sub",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, sub(xs[0], xs[1]));
        },
        {random_in({2, 3}, rng), random_in({2, 3}, rng)});
  sweep("mul",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, mul(xs[0], xs[1]));
        },
        {random_in({2, 3}, rng), random_in({2, 3}, rng)});
  sweep("add_rowvec",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, add_rowvec(xs[0], xs[1]));
        },
        {random_in({4, 3}, rng), random_in({3}, rng)});
  sweep("scale",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, scale(xs[0], -1.7));
        },
        {random_in({2, 4}, rng)});
  sweep("add_const",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, add_const(xs[0], 0.3));
        },
        {random_in({2, 4}, rng)});
  sweep("exp",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, exp(xs[0]));
        },
        {random_in({3, 3}, rng)});
  sweep("log",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, log(xs[0]));
        },
        {random_in({3, 3}, rng, 0.5, 2.5)});
  sweep("tanh",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, tanh(xs[0]));
        },
        {random_in({3, 3}, rng)});
  sweep("sigmoid",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, sigmoid(xs[0]));
        },
        {random_in({3, 3}, rng)});
  {
    Tensor x = random_in({3, 3}, rng);
    for (std::size_t i = 0; i < x.numel(); ++i)  // keep clear of the kink
      if (std::abs(x[i]) < 0.1) x[i] = 0.5;
    sweep("relu",
          [](Tape& t, const std::vector<Var>& xs) {
            return weigh(t, relu(xs[0]));
          },
          {x});
  }
  {
    Tensor x = random_in({3, 3}, rng);
    for (std::size_t i = 0; i < x.numel(); ++i)  // keep clear of the bounds
      if (std::abs(std::abs(x[i]) - 1.0) < 0.1) x[i] = 0.0;
    sweep("clamp",
          [](Tape& t, const std::vector<Var>& xs) {
            return weigh(t, clamp(xs[0], -1.0, 1.0));
          },
          {x});
  }
  sweep("softmax_rows",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, softmax_rows(xs[0]));
        },
        {random_in({3, 5}, rng)});
  sweep("log_softmax_rows",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, log_softmax_rows(xs[0]));
        },
        {random_in({3, 5}, rng)});
  sweep("sum_rows",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, sum_rows(xs[0]));
        },
        {random_in({3, 5}, rng)});
  sweep("sum_all",
        [](Tape& t, const std::vector<Var>& xs) { return sum_all(xs[0]); },
        {random_in({3, 5}, rng)});
  sweep("mean_all",
        [](Tape& t, const std::vector<Var>& xs) { return mean_all(xs[0]); },
        {random_in({3, 5}, rng)});
  sweep("concat_cols",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, concat_cols({xs[0], xs[1], xs[2]}));
        },
        {random_in({2, 3}, rng), random_in({2, 1}, rng), random_in({2, 4}, rng)});
  sweep("slice_cols",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, slice_cols(xs[0], 1, 4));
        },
        {random_in({3, 6}, rng)});
  sweep("angle_stats",
        [](Tape& t, const std::vector<Var>& xs) {
          return weigh(t, angle_stats(xs[0]));
        },
        {random_in({4, 6}, rng)});
}

TEST_CASE("chained composite matches finite differences") {
  Rng rng(26);
  const double err = grad_check(
      [](Tape& t, const std::vector<Var>& xs) {
        const Var hmid = tanh(add_rowvec(matmul(xs[0], xs[1]), xs[2]));
        const Var p = softmax_rows(matmul(hmid, transpose(xs[1])));
        return mean_all(log(clamp(p, 1e-12, 1.0)));
      },
      {random_in({3, 4}, rng), random_in({4, 5}, rng), random_in({5}, rng)},
      1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("dropout: identity at keep=1, masked scaling otherwise") {
  Rng rng(27);
  Tape t;
  const Var x = t.leaf(Tensor::full({4, 8}, 1.0), true);
  Rng r1(99);
  const Var same = dropout(x, 1.0, r1);
  CHECK(same.id() == x.id());

  Rng r2(99);
  const Var y = dropout(x, 0.8, r2);
  int kept = 0;
  for (std::size_t i = 0; i < 32; ++i) {
    const double v = y.value()[i];
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.8)));
    kept += v != 0.0;
  }
  CHECK(kept > 0);

  // Gradient equals the mask that was drawn.
  t.backward(sum_all(y));
  for (std::size_t i = 0; i < 32; ++i)
    CHECK(x.grad()[i] == doctest::Approx(y.value()[i]));

  // Same seed draws the same mask.
  Tape t2;
  Rng r3(99);
  const Var y2 = dropout(t2.leaf(Tensor::full({4, 8}, 1.0)), 0.8, r3);
  CHECK(std::memcmp(y.value().data(), y2.value().data(), 32 * sizeof(double)) == 0);

  Rng r4(1);
  CHECK_THROWS_AS(dropout(x, 0.0, r4), ContractError);
  CHECK_THROWS_AS(dropout(x, 1.2, r4), ContractError);
}

TEST_CASE("angle statistics: two orthogonal rows") {
  Tape t;
  const Var rows = t.leaf(Tensor({2, 2}, {1, 0, 0, 1}), true);
  const Tensor& s = angle_stats(rows).value();
  const double pi = std::numbers::pi;
  CHECK(s[0] == doctest::Approx(pi / 4.0).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(pi * pi / 16.0).epsilon(1e-12));
}

TEST_CASE("angle statistics: mirrored row counts as parallel") {
  // |cos| folds opposite directions together: angle(t, -t) = 0.
  Tape t;
  const Tensor& s =
      angle_stats(t.constant(Tensor({2, 3}, {1, 2, 3, -1, -2, -3}))).value();
  CHECK(s[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("angle statistics reject a zero-norm row") {
  Tape t;
  CHECK_THROWS_AS(angle_stats(t.constant(Tensor({2, 3}, {1, 2, 3, 0, 0, 0}))),
                  DegenerateError);
}

TEST_CASE("tape replay is deterministic bit for bit") {
  auto run = [](std::vector<double>& out) {
    Rng rng(31);
    Tape t;
    const Var a = t.leaf(Tensor::random_normal({6, 6}, rng, 1.0), true);
    const Var b = t.leaf(Tensor::random_normal({6, 6}, rng, 1.0), true);
    Rng drop(7);
    const Var y = sum_all(softmax_rows(dropout(matmul(tanh(a), b), 0.9, drop)));
    t.backward(y);
    out.push_back(y.value()[0]);
    for (std::size_t i = 0; i < 36; ++i) out.push_back(a.grad()[i]);
    for (std::size_t i = 0; i < 36; ++i) out.push_back(b.grad()[i]);
  };
  std::vector<double> r1, r2;
  run(r1);
  run(r2);
  CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(double)) == 0);
}

}  // TEST_SUITE
