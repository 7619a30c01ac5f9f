// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#include <doctest.h>

#include <random>

#include "gridlmp/checkpoint.hpp"
#include "gridlmp/optim.hpp"
#include "gridlmp/tape.hpp"

using namespace gridlmp;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) m(i, j) = u(rng);
  }
  return m;
}

}  // namespace

TEST_CASE("matmul by identity is a no-op") {
  Tape tape;
  std::mt19937_64 rng(1);
  Matrix x = random_matrix(3, 4, rng);
  Var y = tape.matmul(tape.constant(Matrix::Identity(3, 3)), tape.constant(x));
  CHECK((y.value() - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matmul equals the triple-loop reference") {
  std::mt19937_64 rng(2);
  Matrix a = random_matrix(4, 5, rng), b = random_matrix(5, 6, rng);
  Matrix ref = Matrix::Zero(4, 6);
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 6; ++j) {
      for (Index k = 0; k < 5; ++k) ref(i, j) += a(i, k) * b(k, j);
    }
  }
  Tape tape;
  Var y = tape.matmul(tape.constant(a), tape.constant(b));
  CHECK((y.value() - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("matmul rejects incompatible shapes") {
  Tape tape;
  Var a = tape.constant(Matrix::Zero(2, 3));
  Var b = tape.constant(Matrix::Zero(4, 2));
  CHECK_THROWS_AS(tape.matmul(a, b), ShapeMismatch);
}

TEST_CASE("relu clamps negatives") {
  Tape tape;
  Matrix x(1, 3);
  x << -1.0, 0.0, 2.0;
  Var y = tape.relu(tape.constant(x));
  CHECK(y.value()(0, 0) == 0.0);
  CHECK(y.value()(0, 1) == 0.0);
  CHECK(y.value()(0, 2) == 2.0);
}

TEST_CASE("add broadcasts a single row over the leading axis") {
  Tape tape;
  Matrix a(2, 2), b(1, 2);
  a << 1, 2, 3, 4;
  b << 10, 20;
  Var y = tape.add(tape.constant(a), tape.constant(b));
  CHECK(y.value()(0, 0) == 11);
  CHECK(y.value()(1, 1) == 24);
  CHECK_THROWS_AS(tape.add(tape.constant(a), tape.constant(Matrix::Zero(2, 3))),
                  ShapeMismatch);
}

TEST_CASE("mse basics and the two-pass reference") {
  Tape tape;
  std::mt19937_64 rng(3);
  Matrix x = random_matrix(5, 3, rng);
  CHECK(tape.mse(tape.constant(x), tape.constant(x)).value()(0, 0) == 0.0);

  Matrix a(1, 2), b(1, 2);
  a << 1, 2;
  b << 0, 0;
  CHECK(tape.mse(tape.constant(a), tape.constant(b)).value()(0, 0) ==
        doctest::Approx(2.5));

  Matrix p = random_matrix(7, 2, rng), t = random_matrix(7, 2, rng);
  double acc = 0.0;
  for (Index i = 0; i < 7; ++i) {
    for (Index j = 0; j < 2; ++j) acc += (p(i, j) - t(i, j)) * (p(i, j) - t(i, j));
  }
  acc /= 14.0;
  CHECK(tape.mse(tape.constant(p), tape.constant(t)).value()(0, 0) ==
        doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("backward through matmul reproduces the hand chain rule") {
  // loss = mean of (W x)^2 with W = I (2x2): grad_W = (2/n) (Wx) x^T = x x^T
  Tape tape;
  Tensor w(Matrix::Identity(2, 2));
  Matrix x(2, 1);
  x << 1.0, 2.0;
  Var y = tape.matmul(tape.leaf(w), tape.constant(x));
  tape.backward(tape.mean_square(y));
  Matrix expect = x * x.transpose();
  CHECK((w.grad - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("a loss with no parameter on the path leaves grads zero") {
  Tape tape;
  Tensor w(Matrix::Ones(2, 2));
  (void)tape.leaf(w);  // registered but unused by the loss
  Var loss = tape.mean_square(tape.constant(Matrix::Ones(3, 3)));
  tape.backward(loss);
  CHECK(w.grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward requires a scalar loss and a fresh tape") {
  Tape tape;
  Tensor w(Matrix::Ones(2, 2));
  Var y = tape.relu(tape.leaf(w));
  CHECK_THROWS_AS(tape.backward(y), NotScalarLoss);
  Var loss = tape.mean_square(y);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), TapeConsumed);
  tape.reset();
  CHECK(tape.size() == 0);
}

TEST_CASE("gradient check on a composite taped computation") {
  std::mt19937_64 rng(5);
  Tensor w1(random_matrix(4, 6, rng)), b1(random_matrix(1, 6, rng));
  Tensor w2(random_matrix(6, 2, rng));
  Matrix x = random_matrix(3, 4, rng), t = random_matrix(3, 2, rng);

  auto loss_of = [&]() {
    Tape tape;
    Var h = tape.relu(tape.add(tape.matmul(tape.constant(x), tape.leaf(w1)),
                               tape.leaf(b1)));
    Var out = tape.matmul(h, tape.leaf(w2));
    Var scaled = tape.scale(tape.hadamard(out, out), 0.5);
    return tape.mse(scaled, tape.constant(t)).value()(0, 0);
  };
  // analytic grads
  std::vector<Tensor*> params = {&w1, &b1, &w2};
  {
    Tape tape;
    Var h = tape.relu(tape.add(tape.matmul(tape.constant(x), tape.leaf(w1)),
                               tape.leaf(b1)));
    Var out = tape.matmul(h, tape.leaf(w2));
    Var scaled = tape.scale(tape.hadamard(out, out), 0.5);
    tape.backward(tape.mse(scaled, tape.constant(t)));
  }
  std::vector<Matrix> grads;
  for (Tensor* p : params) grads.push_back(p->grad);

  const double h = 1e-5;
  for (int c = 0; c < 20; ++c) {
    size_t pi = rng() % params.size();
    Index i = static_cast<Index>(rng() % params[pi]->value.rows());
    Index j = static_cast<Index>(rng() % params[pi]->value.cols());
    double keep = params[pi]->value(i, j);
    params[pi]->value(i, j) = keep + h;
    double fp = loss_of();
    params[pi]->value(i, j) = keep - h;
    double fm = loss_of();
    params[pi]->value(i, j) = keep;
    double fd = (fp - fm) / (2 * h);
    double an = grads[pi](i, j);
    CHECK(std::abs(fd - an) <= 1e-4 * std::max({std::abs(fd), std::abs(an), 1e-4}));
  }
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
  Tensor p(Matrix::Ones(2, 2));
  p.zero_grad();
  nn::AdamState state;
  adam_step({&p}, state);
  CHECK((p.value - Matrix::Ones(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.step_count == 1);
}

TEST_CASE("one adam step with unit gradient moves by almost lr") {
  Tensor p(Matrix::Zero(1, 1));
  p.grad = Matrix::Ones(1, 1);
  nn::AdamState state;
  adam_step({&p}, state);
  // bias-corrected m-hat = 1, v-hat = 1: step = lr / (1 + eps)
  CHECK(p.value(0, 0) == doctest::Approx(-9.99e-4).epsilon(1e-3));
}

TEST_CASE("adam descends a convex quadratic") {
  Tensor p(Matrix::Constant(1, 1, 3.0));
  nn::AdamState state;
  auto loss = [&]() { return p.value(0, 0) * p.value(0, 0); };
  double l0 = loss();
  for (int i = 0; i < 2; ++i) {
    p.grad = Matrix::Constant(1, 1, 2.0 * p.value(0, 0));
    adam_step({&p}, state);
  }
  CHECK(loss() < l0);
}

TEST_CASE("glorot init is deterministic under a fixed seed") {
  Matrix a = nn::glorot_uniform(5, 7, 5, 7, 42);
  Matrix b = nn::glorot_uniform(5, 7, 5, 7, 42);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  const double bound = std::sqrt(6.0 / 12.0);
  CHECK(a.cwiseAbs().maxCoeff() <= bound);
  CHECK((nn::glorot_uniform(5, 7, 5, 7, 43) - a).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("checkpoints round-trip exactly") {
  std::mt19937_64 rng(9);
  std::map<std::string, Matrix> arrays;
  arrays["layer0/weight"] = random_matrix(3, 4, rng);
  arrays["layer0/bias"] = random_matrix(1, 4, rng);
  arrays["layer1/weight"] = random_matrix(4, 1, rng) * 1e-17;
  const std::string path = "/tmp/gridlmp_test_checkpoint.txt";
  nn::save_checkpoint(path, arrays);
  auto loaded = nn::load_checkpoint(path);
  REQUIRE(loaded.size() == arrays.size());
  for (const auto& [k, m] : arrays) {
    REQUIRE(loaded.count(k) == 1);
    CHECK((loaded[k] - m).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(nn::load_checkpoint("/tmp/does_not_exist_ckpt.txt"), Error);
}
