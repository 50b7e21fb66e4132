// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "doctest.h"
#include "sia/autodiff.hpp"

using namespace sia;
using ad::Matrix;
using ad::Var;

namespace {

Matrix random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Max relative difference between backward gradients and central differences.
double check_gradients(std::vector<Var> leaves, const std::function<Var()>& f) {
  for (auto& l : leaves) l.node()->grad.resize(0, 0);
  ad::backward(f());
  double worst = 0.0;
  for (auto& l : leaves) {
    const Matrix g = l.grad();
    for (Eigen::Index k = 0; k < l.value().size(); ++k) {
      double& w = l.mutable_value().data()[k];
      const double orig = w;
      w = orig + 1e-6;
      const double p = f().item();
      w = orig - 1e-6;
      const double m = f().item();
      w = orig;
      const double num = (p - m) / 2e-6;
      worst = std::max(worst, std::abs(num - g.data()[k]) / std::max({1e-4, std::abs(num), std::abs(g.data()[k])}));
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("elementary ops") {
    std::mt19937_64 rng(1);
    Var a = ad::leaf(random_matrix(rng, 3, 4), true);
    Var b = ad::leaf(random_matrix(rng, 4, 2), true);
    Var c = ad::leaf(random_matrix(rng, 3, 4), true);
    Var row = ad::leaf(random_matrix(rng, 1, 4), true);
    Var s = ad::leaf(Matrix::Constant(1, 1, 1.7), true);
    Var w = ad::constant(random_matrix(rng, 3, 2));

    CHECK(check_gradients({a, b}, [&] { return ad::sum_all(ad::hadamard(ad::matmul(a, b), w)); }) < 1e-6);
    const Var w3 = ad::constant(random_matrix(rng, 3, 3));
    CHECK(check_gradients({a, c}, [&] { return ad::sum_all(ad::hadamard(ad::matmul_nt(a, c), w3)); }) < 1e-6);
    CHECK(check_gradients({a, row}, [&] { return ad::mean_all(ad::gelu(ad::add_row(a, row))); }) < 1e-6);
    CHECK(check_gradients({a, s}, [&] { return ad::sum_all(ad::sigmoid(ad::scale_by(a, s))); }) < 1e-6);
    CHECK(check_gradients({a, c}, [&] { return ad::sum_all(ad::hadamard(ad::sub(a, c), ad::add(a, c))); }) < 1e-6);
  }

  TEST_CASE("normalizations and softmax") {
    std::mt19937_64 rng(2);
    Var x = ad::leaf(random_matrix(rng, 4, 5), true);
    Var g = ad::leaf(random_matrix(rng, 1, 5), true);
    Var b = ad::leaf(random_matrix(rng, 1, 5), true);
    const Var w = ad::constant(random_matrix(rng, 4, 5));
    CHECK(check_gradients({x, g, b}, [&] { return ad::sum_all(ad::hadamard(ad::layer_norm_rows(x, g, b), w)); }) < 1e-5);
    CHECK(check_gradients({x}, [&] { return ad::sum_all(ad::hadamard(ad::l2_normalize_rows(x), w)); }) < 1e-5);
    Var sq = ad::leaf(random_matrix(rng, 4, 4), true);
    const Var w4 = ad::constant(random_matrix(rng, 4, 4));
    CHECK(check_gradients({sq}, [&] { return ad::sum_all(ad::hadamard(ad::softmax_rows(sq), w4)); }) < 1e-5);
    CHECK(check_gradients({sq}, [&] { return ad::sum_all(ad::hadamard(ad::softmax_rows(sq, true), w4)); }) < 1e-5);

    const Matrix sm = ad::softmax_rows(sq, true).value();
    for (int i = 0; i < 4; ++i) {
      CHECK(sm.row(i).sum() == doctest::Approx(1.0));
      for (int j = i + 1; j < 4; ++j) CHECK(sm(i, j) == 0.0);
    }
  }

  TEST_CASE("structural ops") {
    std::mt19937_64 rng(3);
    Var a = ad::leaf(random_matrix(rng, 3, 4), true);
    Var b = ad::leaf(random_matrix(rng, 2, 4), true);
    Var c = ad::leaf(random_matrix(rng, 3, 2), true);
    const Var w5 = ad::constant(random_matrix(rng, 5, 4));
    const Var w6 = ad::constant(random_matrix(rng, 3, 6));
    CHECK(check_gradients({a, b}, [&] { return ad::sum_all(ad::hadamard(ad::concat_rows({a, b}), w5)); }) < 1e-6);
    CHECK(check_gradients({a, c}, [&] { return ad::sum_all(ad::hadamard(ad::concat_cols({a, c}), w6)); }) < 1e-6);
    CHECK(check_gradients({a}, [&] { return ad::sum_all(ad::slice_rows(ad::slice_cols(a, 1, 2), 1, 2)); }) < 1e-6);
    // Repeated rows accumulate.
    const Var gathered = ad::gather_rows(a, {2, 0, 2});
    CHECK(gathered.rows() == 3);
    CHECK(check_gradients({a}, [&] { return ad::sum_all(ad::gelu(ad::gather_rows(a, {2, 0, 2}))); }) < 1e-6);
  }

  TEST_CASE("no-grad guard records nothing") {
    Var a = ad::leaf(Matrix::Ones(2, 2), true);
    {
      ad::NoGradGuard guard;
      CHECK_FALSE(ad::grad_enabled());
      const Var y = ad::sum_all(ad::scale(a, 3.0));
      CHECK(y.item() == 12.0);
      CHECK_FALSE(static_cast<bool>(y.node()->backward));
    }
    CHECK(ad::grad_enabled());
  }

  TEST_CASE("frozen leaves get no gradient") {
    Var a = ad::leaf(Matrix::Ones(2, 2), false);
    Var b = ad::leaf(Matrix::Ones(2, 2), true);
    ad::backward(ad::sum_all(ad::hadamard(a, b)));
    CHECK(a.grad().isZero());
    CHECK(b.grad().isOnes());
  }

  TEST_CASE("parameter set") {
    ad::ParameterSet ps;
    ps.add("x", Matrix::Ones(2, 3), true);
    ps.add("y", Matrix::Ones(1, 1), false);
    CHECK(ps.scalar_count() == 7);
    CHECK(ps.contains("x"));
    CHECK(ps.get("y").rows() == 1);
  }
}
