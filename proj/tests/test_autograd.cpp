#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aia/autograd.hpp"
#include "support/grad_check.hpp"
#include "support/oracles.hpp"

using namespace aia;

namespace {

Matrix rand_matrix(Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = uniform_real(rng, lo, hi);
  return m;
}

BoolMatrix all_valid(int rows, int cols) {
  return BoolMatrix::Constant(rows, cols, true);
}

}  // namespace

TEST_CASE("matmul basics") {
  Tape tape;
  Matrix a(2, 2);
  a << 1, 2, 3, 4;

  SUBCASE("identity") {
    auto out = matmul(tape, constant(Matrix::Identity(2, 2)), constant(a));
    CHECK(out->value.isApprox(a));
  }
  SUBCASE("hand example") {
    Matrix b(2, 1);
    b << 0, 1;
    auto out = matmul(tape, constant(a), constant(b));
    CHECK(out->value(0, 0) == doctest::Approx(2));
    CHECK(out->value(1, 0) == doctest::Approx(4));
  }
  SUBCASE("zeros annihilate") {
    Rng rng(7);
    auto out =
        matmul(tape, constant(Matrix::Zero(2, 3)), constant(rand_matrix(rng, 3, 4)));
    CHECK(out->value.isZero(0.0));
    CHECK(out->rows() == 2);
    CHECK(out->cols() == 4);
  }
  SUBCASE("shape mismatch names both shapes") {
    try {
      matmul(tape, constant(Matrix::Zero(2, 3)), constant(Matrix::Zero(4, 5)));
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2,3]") != std::string::npos);
      CHECK(msg.find("[4,5]") != std::string::npos);
    }
  }
}

TEST_CASE("matmul agrees with triple-loop oracle") {
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const int m = 1 + static_cast<int>(uniform_int(rng, 0, 5));
    const int k = 1 + static_cast<int>(uniform_int(rng, 0, 5));
    const int n = 1 + static_cast<int>(uniform_int(rng, 0, 5));
    Matrix a = rand_matrix(rng, m, k), b = rand_matrix(rng, k, n);
    Tape tape;
    auto out = matmul(tape, constant(a), constant(b));
    Matrix expect =
        oracle::to_eigen(oracle::matmul(oracle::from_eigen(a), oracle::from_eigen(b)));
    CHECK(out->value.isApprox(expect, 1e-12));
  }
}

TEST_CASE("softmax_rows") {
  Tape tape;

  SUBCASE("uniform on constant row") {
    Matrix x(1, 3);
    x << 0, 0, 0;
    auto out = softmax_rows(tape, constant(x), all_valid(1, 3));
    for (int c = 0; c < 3; ++c) CHECK(out->value(0, c) == doctest::Approx(1.0 / 3));
  }
  SUBCASE("single valid key wins") {
    Matrix x(1, 2);
    x << 5, 9;
    BoolMatrix mask(1, 2);
    mask << true, false;
    auto out = softmax_rows(tape, constant(x), mask);
    CHECK(out->value(0, 0) == 1.0);
    CHECK(out->value(0, 1) == 0.0);  // masked entries are exactly zero
  }
  SUBCASE("two-entry row matches direct evaluation") {
    Matrix x(1, 2);
    x << 1, 2;
    auto out = softmax_rows(tape, constant(x), all_valid(1, 2));
    const double e = std::exp(1.0);
    CHECK(out->value(0, 0) == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-9));
    CHECK(out->value(0, 1) == doctest::Approx(e / (1.0 + e)).epsilon(1e-9));
    CHECK(out->value(0, 0) == doctest::Approx(0.2689).epsilon(1e-3));
  }
  SUBCASE("all-masked row is all zeros, not NaN") {
    Matrix x(2, 3);
    x << 100, 200, 300, 1, 2, 3;
    BoolMatrix mask(2, 3);
    mask.row(0).setConstant(false);
    mask.row(1).setConstant(true);
    auto out = softmax_rows(tape, constant(x), mask);
    CHECK(out->value.row(0).isZero(0.0));
    CHECK(out->value.row(1).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out->value.allFinite());
  }
  SUBCASE("valid entries positive and sum to 1") {
    Rng rng(3);
    for (int i = 0; i < 30; ++i) {
      const int rows = 1 + static_cast<int>(uniform_int(rng, 0, 4));
      const int cols = 1 + static_cast<int>(uniform_int(rng, 0, 6));
      Matrix x = rand_matrix(rng, rows, cols, -30.0, 30.0);
      BoolMatrix mask(rows, cols);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) mask(r, c) = uniform_real(rng, 0, 1) < 0.7;
      Tape t;
      auto out = softmax_rows(t, constant(x), mask);
      for (int r = 0; r < rows; ++r) {
        double sum = 0.0;
        bool any = false;
        for (int c = 0; c < cols; ++c) {
          if (mask(r, c)) {
            CHECK(out->value(r, c) > 0.0);
            sum += out->value(r, c);
            any = true;
          } else {
            CHECK(out->value(r, c) == 0.0);
          }
        }
        if (any) CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("elementwise ops") {
  Tape tape;

  SUBCASE("relu definition") {
    Matrix x(1, 3);
    x << -1, 0, 2;
    auto out = relu(tape, constant(x));
    CHECK(out->value(0, 0) == 0.0);
    CHECK(out->value(0, 1) == 0.0);
    CHECK(out->value(0, 2) == 2.0);
  }
  SUBCASE("mul definition") {
    Matrix a(1, 2), b(1, 2);
    a << 1, 2;
    b << 3, 4;
    auto out = mul(tape, constant(a), constant(b));
    CHECK(out->value(0, 0) == 3.0);
    CHECK(out->value(0, 1) == 8.0);
  }
  SUBCASE("scale by zero annihilates") {
    Matrix a(1, 2);
    a << 1, 2;
    auto out = scale(tape, constant(a), 0.0);
    CHECK(out->value.isZero(0.0));
  }
  SUBCASE("binary shape mismatch") {
    CHECK_THROWS_AS(
        mul(tape, constant(Matrix::Zero(1, 2)), constant(Matrix::Zero(2, 1))),
        ShapeError);
    CHECK_THROWS_AS(
        add(tape, constant(Matrix::Zero(1, 2)), constant(Matrix::Zero(1, 3))),
        ShapeError);
  }
}

TEST_CASE("layer_norm_rows") {
  Tape tape;

  SUBCASE("constant row maps to zero") {
    Matrix x(1, 3);
    x << 1, 1, 1;
    auto out = layer_norm_rows(tape, constant(x), constant(Matrix::Ones(1, 3)),
                               constant(Matrix::Zero(1, 3)));
    CHECK(out->value.isZero(1e-12));
  }
  SUBCASE("two-point standardization") {
    Matrix x(1, 2);
    x << 0, 2;
    auto out = layer_norm_rows(tape, constant(x), constant(Matrix::Ones(1, 2)),
                               constant(Matrix::Zero(1, 2)), 1e-12);
    CHECK(out->value(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(out->value(0, 1) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("gamma zero forces beta") {
    Matrix x(1, 2);
    x << 0, 2;
    auto out = layer_norm_rows(tape, constant(x), constant(Matrix::Zero(1, 2)),
                               constant(Matrix::Constant(1, 2, 7.0)));
    CHECK(out->value(0, 0) == 7.0);
    CHECK(out->value(0, 1) == 7.0);
  }
  SUBCASE("rows have zero mean and unit population variance") {
    Rng rng(5);
    for (int i = 0; i < 30; ++i) {
      const int rows = 1 + static_cast<int>(uniform_int(rng, 0, 4));
      const int cols = 2 + static_cast<int>(uniform_int(rng, 0, 6));
      Matrix x = rand_matrix(rng, rows, cols);
      Tape t;
      auto out = layer_norm_rows(t, constant(x), constant(Matrix::Ones(1, cols)),
                                 constant(Matrix::Zero(1, cols)), 1e-8);
      for (int r = 0; r < rows; ++r) {
        const double mean = out->value.row(r).mean();
        const double var = (out->value.row(r).array() - mean).square().mean();
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-4);
      }
    }
  }
}

TEST_CASE("bce_with_logits") {
  Tape tape;

  SUBCASE("logit zero, target one gives ln 2") {
    auto out = bce_with_logits(tape, constant(Matrix::Zero(1, 1)), Matrix::Ones(1, 1));
    CHECK(out->value(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("saturated correct logit gives ~0") {
    auto out = bce_with_logits(tape, constant(Matrix::Constant(1, 1, 1e9)),
                               Matrix::Ones(1, 1));
    CHECK(out->value(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out->value(0, 0) >= 0.0);
  }
  SUBCASE("mean over entries, symmetric at zero") {
    Matrix targets(1, 2);
    targets << 1, 0;
    auto out = bce_with_logits(tape, constant(Matrix::Zero(1, 2)), targets);
    CHECK(out->value(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("non-binary target rejected") {
    CHECK_THROWS_AS(bce_with_logits(tape, constant(Matrix::Zero(1, 1)),
                                    Matrix::Constant(1, 1, 0.5)),
                    Error);
  }
  SUBCASE("always non-negative") {
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
      Matrix logits = rand_matrix(rng, 2, 3, -50.0, 50.0);
      Matrix targets(2, 3);
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c)
          targets(r, c) = uniform_real(rng, 0, 1) < 0.5 ? 1.0 : 0.0;
      Tape t;
      CHECK(bce_with_logits(t, constant(logits), targets)->value(0, 0) >= 0.0);
    }
  }
}

TEST_CASE("backward") {
  SUBCASE("loss = sum(x*x) gives 2x") {
    Tape tape;
    Matrix x(1, 3);
    x << 1, 2, 3;
    auto xt = parameter(x);
    auto loss = sum_all(tape, mul(tape, xt, xt));
    tape.backward(loss);
    CHECK(xt->grad(0, 0) == doctest::Approx(2.0));
    CHECK(xt->grad(0, 1) == doctest::Approx(4.0));
    CHECK(xt->grad(0, 2) == doctest::Approx(6.0));
  }
  SUBCASE("matmul-sum gradient: row-sums pattern and finite differences") {
    Rng rng(13);
    auto a = parameter(rand_matrix(rng, 3, 4));
    auto b = constant(rand_matrix(rng, 4, 2));
    auto report =
        gradcheck::check({a}, [&](Tape& t) { return sum_all(t, matmul(t, a, b)); });
    CHECK(report.ok);
    Tape t;
    auto loss = sum_all(t, matmul(t, a, b));
    t.backward(loss);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c)
        CHECK(a->grad(r, c) == doctest::Approx(b->value.row(c).sum()).epsilon(1e-9));
  }
  SUBCASE("constant loss leaves grads zero") {
    Tape tape;
    auto x = parameter(Matrix::Ones(2, 2));
    auto loss = constant(Matrix::Zero(1, 1));
    tape.backward(loss);
    CHECK(x->grad_or_zero().isZero(0.0));
  }
  SUBCASE("non-scalar loss rejected") {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(constant(Matrix::Zero(2, 1))), ShapeError);
  }
  SUBCASE("grads accumulate across backward calls until cleared") {
    auto x = parameter(Matrix::Ones(1, 1));
    for (int i = 0; i < 2; ++i) {
      Tape t;
      auto loss = sum_all(t, mul(t, x, x));
      t.backward(loss);
    }
    CHECK(x->grad(0, 0) == doctest::Approx(4.0));  // 2x twice
  }
}

TEST_CASE("sgd_step") {
  SUBCASE("single plain step") {
    auto p = parameter(Matrix::Ones(1, 1));
    p->accumulate_grad(Matrix::Ones(1, 1));
    Sgd opt(0.1, 0.0);
    opt.step({p});
    CHECK(p->value(0, 0) == doctest::Approx(0.9));
    CHECK(p->grad_or_zero().isZero(0.0));  // grads cleared
  }
  SUBCASE("zero grad leaves parameter unchanged") {
    auto p = parameter(Matrix::Constant(1, 1, 3.0));
    p->accumulate_grad(Matrix::Zero(1, 1));
    Sgd opt(0.1, 0.9);
    opt.step({p});
    CHECK(p->value(0, 0) == 3.0);
  }
  SUBCASE("momentum recurrence: 1 -> 0.9 -> 0.71") {
    auto p = parameter(Matrix::Ones(1, 1));
    Sgd opt(0.1, 0.9);
    p->accumulate_grad(Matrix::Ones(1, 1));
    opt.step({p});
    CHECK(p->value(0, 0) == doctest::Approx(0.9).epsilon(1e-12));
    p->accumulate_grad(Matrix::Ones(1, 1));
    opt.step({p});
    CHECK(p->value(0, 0) == doctest::Approx(0.71).epsilon(1e-12));
  }
  SUBCASE("missing grad is an error") {
    auto p = parameter(Matrix::Ones(1, 1));
    Sgd opt(0.1, 0.0);
    CHECK_THROWS_AS(opt.step({p}), Error);
  }
}

TEST_CASE("finite differences across every differentiable op") {
  Rng rng(17);
  int instances = 0;
  while (instances < 100) {
    const int pick = instances % 8;
    const int m = 1 + static_cast<int>(uniform_int(rng, 0, 4));
    const int n = 2 + static_cast<int>(uniform_int(rng, 0, 6));
    gradcheck::Report report;
    switch (pick) {
      case 0: {
        auto a = parameter(rand_matrix(rng, m, n));
        auto b = parameter(rand_matrix(rng, n, m));
        report = gradcheck::check(
            {a, b}, [&](Tape& t) { return sum_all(t, matmul(t, a, b)); });
        break;
      }
      case 1: {
        auto a = parameter(rand_matrix(rng, m, n));
        auto b = parameter(rand_matrix(rng, m, n));
        report = gradcheck::check(
            {a, b}, [&](Tape& t) { return sum_all(t, mul(t, add(t, a, b), b)); });
        break;
      }
      case 2: {
        // Central differences are invalid within the step of a relu kink;
        // keep entries clear of zero.
        Matrix x = rand_matrix(rng, m, n);
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < n; ++c)
            if (std::abs(x(r, c)) < gradcheck::kKinkMargin)
              x(r, c) = gradcheck::kKinkMargin * (x(r, c) >= 0 ? 1 : -1);
        auto a = parameter(x);
        report =
            gradcheck::check({a}, [&](Tape& t) { return sum_all(t, relu(t, a)); });
        break;
      }
      case 3: {
        auto a = parameter(rand_matrix(rng, m, n));
        report = gradcheck::check(
            {a}, [&](Tape& t) { return sum_all(t, scale(t, a, -1.7)); });
        break;
      }
      case 4: {
        auto a = parameter(rand_matrix(rng, m, n));
        BoolMatrix mask(m, n);
        for (int r = 0; r < m; ++r) {
          int valid = 0;
          for (int c = 0; c < n; ++c) {
            mask(r, c) = uniform_real(rng, 0, 1) < 0.7;
            valid += mask(r, c);
          }
          if (valid == 0) mask(r, 0) = true;
        }
        Matrix probe = rand_matrix(rng, m, n);
        report = gradcheck::check({a}, [&](Tape& t) {
          return sum_all(t, mul(t, softmax_rows(t, a, mask), constant(probe)));
        });
        break;
      }
      case 5: {
        auto a = parameter(rand_matrix(rng, m, n));
        auto gamma = parameter(rand_matrix(rng, 1, n, 0.5, 1.5));
        auto beta = parameter(rand_matrix(rng, 1, n));
        Matrix probe = rand_matrix(rng, m, n);
        report = gradcheck::check({a, gamma, beta}, [&](Tape& t) {
          return sum_all(
              t, mul(t, layer_norm_rows(t, a, gamma, beta), constant(probe)));
        });
        break;
      }
      case 6: {
        auto a = parameter(rand_matrix(rng, m, n));
        Matrix targets(m, n);
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < n; ++c)
            targets(r, c) = uniform_real(rng, 0, 1) < 0.5 ? 1.0 : 0.0;
        report = gradcheck::check(
            {a}, [&](Tape& t) { return bce_with_logits(t, a, targets); });
        break;
      }
      default: {
        auto a = parameter(rand_matrix(rng, m, n));
        auto row = parameter(rand_matrix(rng, 1, n));
        Vector w(m);
        for (int r = 0; r < m; ++r) w(r) = uniform_real(rng, -1, 1);
        std::vector<int> idx = {0, m - 1, 0};
        report = gradcheck::check({a, row}, [&](Tape& t) {
          auto x = add_row(t, a, row);
          x = row_scale(t, x, w);
          x = concat_rows(t, {x, x});
          x = take_rows(t, x, idx);
          return sum_all(t, x);
        });
        break;
      }
    }
    CHECK_MESSAGE(report.ok, "op kind ", pick, " max rel err ", report.max_rel_err);
    ++instances;
  }
}
