// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/LU>

#include <cmath>

#include "asymcal/error.hpp"
#include "asymcal/linalg.hpp"
#include "asymcal/random.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace asymcal;
using testsupport::max_diff;
using testsupport::naive_matmul;
using testsupport::naive_transpose;

namespace {

Matrix eigen_inverse(const Matrix& a) {
  Eigen::MatrixXd e(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  const Eigen::MatrixXd inv = e.inverse();
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = inv(i, j);
  return out;
}

CholFactor factor_of(const Matrix& hinv) { return inverse_cholesky_of(hinv); }

Matrix trailing(const Matrix& m, std::size_t q) {
  return m.block(q, q, m.rows() - q, m.cols() - q);
}

}  // namespace

TEST_CASE("build_hessian") {
  SUBCASE("identity input") {
    const HessianState h = build_hessian(Matrix::identity(2), 0.01);
    CHECK(h.damp_lambda == doctest::Approx(0.01));
    CHECK(h.h(0, 0) == doctest::Approx(1.01));
    CHECK(h.h(0, 1) == 0.0);
    CHECK(h.dead_channels.empty());
  }
  SUBCASE("matches triple-loop Gram plus dampening") {
    const Matrix x = gen_correlated(Seed{7}, 4, 64, 0.5);
    const HessianState h = build_hessian(x, 0.01);
    Matrix g = naive_matmul(x, naive_transpose(x));
    double mean = 0.0;
    for (std::size_t i = 0; i < 4; ++i) mean += g(i, i) / 4.0;
    for (std::size_t i = 0; i < 4; ++i) g(i, i) += 0.01 * mean;
    CHECK(max_diff(h.h, g) <= 1e-10 * testsupport::max_abs_entry(g));
    CHECK(h.damp_lambda == doctest::Approx(0.01 * mean));
  }
  SUBCASE("vision-style ratio") {
    const HessianState h = build_hessian(scaled(Matrix::identity(3), 2.0), 0.10);
    CHECK(h.damp_lambda == doctest::Approx(0.4));
  }
  SUBCASE("dead channels get the dampening term alone") {
    Matrix x = gen_normal(Seed{1}, 3, 10);
    for (std::size_t c = 0; c < 10; ++c) x(1, c) = 0.0;
    const HessianState h = build_hessian(x, 0.01);
    REQUIRE(h.dead_channels.size() == 1);
    CHECK(h.dead_channels[0] == 1);
    CHECK(h.h(1, 1) == h.damp_lambda);
    CHECK(h.h(1, 1) > 0.0);
  }
  SUBCASE("all-zero input is degenerate") {
    CHECK_THROWS_AS(build_hessian(Matrix(3, 5), 0.01), DegenerateInputError);
  }
  SUBCASE("symmetric") {
    const HessianState h = build_hessian(gen_normal(Seed{2}, 6, 30), 0.01);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) CHECK(h.h(i, j) == h.h(j, i));
  }
}

TEST_CASE("inverse_cholesky") {
  SUBCASE("diagonal case") {
    HessianState h;
    h.n = 3;
    h.h = scaled(Matrix::identity(3), 4.0);
    const CholFactor l = inverse_cholesky(h);
    CHECK(max_diff(l.l, scaled(Matrix::identity(3), 0.5)) <= 1e-15);
  }
  SUBCASE("2x2 against the explicit inverse") {
    HessianState h;
    h.n = 2;
    h.h = Matrix::from_rows({{2, 1}, {1, 2}});
    const CholFactor l = inverse_cholesky(h);
    const Matrix llt = naive_matmul(l.l, naive_transpose(l.l));
    const Matrix expect = Matrix::from_rows({{2.0 / 3, -1.0 / 3}, {-1.0 / 3, 2.0 / 3}});
    CHECK(max_diff(llt, expect) <= 1e-14);
  }
  SUBCASE("random SPD 16x16 reconstructs") {
    HessianState h;
    h.n = 16;
    h.h = testsupport::random_spd(Seed{3}, 16);
    const CholFactor l = inverse_cholesky(h);
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = i + 1; j < 16; ++j) CHECK(l.l(i, j) == 0.0);
    const Matrix prod = naive_matmul(naive_matmul(l.l, naive_transpose(l.l)), h.h);
    CHECK(max_diff(prod, Matrix::identity(16)) <= 1e-8);
  }
  SUBCASE("c·I input gives a scaled identity") {
    for (double c : {0.5, 1.0, 3.0}) {
      const HessianState h = build_hessian(scaled(Matrix::identity(5), c), 0.01);
      const CholFactor l = inverse_cholesky(h);
      const double expect = 1.0 / std::sqrt(c * c + 0.01 * c * c);
      CHECK(max_diff(l.l, scaled(Matrix::identity(5), expect)) <= 1e-14);
    }
  }
  SUBCASE("non-PD matrix names the failing pivot") {
    const Matrix bad = Matrix::from_rows({{1, 0, 0}, {0, -1, 0}, {0, 0, 1}});
    try {
      (void)cholesky_lower(bad);
      FAIL("expected a factorization error");
    } catch (const FactorizationError& e) {
      CHECK(e.pivot() == 1);
    }
  }
}

TEST_CASE("ge_eliminate") {
  SUBCASE("identity pivot") {
    const Matrix e = ge_eliminate(Matrix::identity(3), 0);
    CHECK(max_diff(e, Matrix::from_rows({{0, 0, 0}, {0, 1, 0}, {0, 0, 1}})) == 0.0);
  }
  SUBCASE("row and column q vanish exactly") {
    const Matrix hinv = eigen_inverse(testsupport::random_spd(Seed{4}, 7));
    const Matrix e = ge_eliminate(hinv, 4);
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(e(4, i) == 0.0);
      CHECK(e(i, 4) == 0.0);
    }
  }
  SUBCASE("equals the inverse with the row deleted") {
    const Matrix x = gen_normal(Seed{5}, 8, 40);
    const Matrix hinv = eigen_inverse(naive_matmul(x, naive_transpose(x)));
    const Matrix e = ge_eliminate(hinv, 3);
    Matrix xd(7, 40);
    for (std::size_t r = 0, o = 0; r < 8; ++r) {
      if (r == 3) continue;
      for (std::size_t c = 0; c < 40; ++c) xd(o, c) = x(r, c);
      ++o;
    }
    const Matrix small = eigen_inverse(naive_matmul(xd, naive_transpose(xd)));
    Matrix embedded(8, 8);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 7; ++j) embedded(i < 3 ? i : i + 1, j < 3 ? j : j + 1) = small(i, j);
    CHECK(max_diff(e, embedded) <= 1e-10 * testsupport::max_abs_entry(embedded));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(ge_eliminate(Matrix::from_rows({{0, 1}, {1, 1}}), 0), EliminationError);
    CHECK_THROWS_AS(ge_eliminate(Matrix::identity(2), 2), IndexError);
    CHECK_THROWS_AS(ge_eliminate(Matrix(2, 3), 0), ShapeError);
  }
}

TEST_CASE("chol_slice_hinv") {
  SUBCASE("diagonal factor") {
    Matrix d(4, 4);
    const double vals[] = {2.0, 3.0, 5.0, 7.0};
    for (std::size_t i = 0; i < 4; ++i) d(i, i) = vals[i];
    const Matrix s = chol_slice_hinv(factor_of(d), 1);
    REQUIRE(s.rows() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(s(i, i) == doctest::Approx(vals[i + 1]));
    CHECK(s(0, 1) == 0.0);
  }
  SUBCASE("last index") {
    const CholFactor l = factor_of(eigen_inverse(testsupport::random_spd(Seed{6}, 5)));
    const Matrix s = chol_slice_hinv(l, 4);
    REQUIRE(s.rows() == 1);
    CHECK(s(0, 0) == doctest::Approx(l.l(4, 4) * l.l(4, 4)));
  }
  SUBCASE("matches iterated elimination on a 12x12") {
    const Matrix hinv = eigen_inverse(testsupport::random_spd(Seed{7}, 12));
    const CholFactor l = factor_of(hinv);
    Matrix elim = hinv;
    for (std::size_t q = 0; q < 12; ++q) {
      const Matrix target = trailing(elim, q);
      const Matrix got = chol_slice_hinv(l, q);
      CHECK(max_diff(got, target) <= 1e-6 * testsupport::max_abs_entry(target));
      if (q + 1 < 12) elim = ge_eliminate(elim, q);
    }
  }
  SUBCASE("out of range") {
    CHECK_THROWS_AS(chol_slice_hinv(factor_of(Matrix::identity(3)), 3), IndexError);
  }
}

TEST_CASE("P construction") {
  SUBCASE("zero residual input") {
    const Matrix x = gen_normal(Seed{8}, 5, 20);
    const CholFactor l = inverse_cholesky(build_hessian(x, 0.01));
    CHECK(max_abs(compute_p_reference(Matrix(5, 20), x, l)) == 0.0);
    CHECK(max_abs(compute_p_fused(Matrix(5, 5), l)) == 0.0);
  }
  SUBCASE("n = 1") {
    const Matrix x = gen_normal(Seed{9}, 1, 8);
    const CholFactor l = inverse_cholesky(build_hessian(x, 0.01));
    const Matrix dx = gen_normal(Seed{10}, 1, 8);
    CHECK(compute_p_reference(dx, x, l) == Matrix(1, 1));
    CHECK(compute_p_fused(matmul_nt(dx, x), l) == Matrix(1, 1));
  }
  SUBCASE("seed-17 golden instance") {
    // Independent numpy evaluation, tests/golden/gen_golden.py.
    const double golden[36] = {
        0.0, -0.012961744799761206, -0.017359030493740706, 0.018050418158334733,
        0.019592152148497192, -0.029898005243322884, 0.0, 0.0, -0.030813670448931185,
        0.028059326986077413, -0.002879378164999898, -0.004522920404780887, 0.0, 0.0, 0.0,
        0.0005407045737059243, -0.03520282025677501, 0.03558664768270625, 0.0, 0.0, 0.0, 0.0,
        -0.010656861438377857, 0.0070465226167839325, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.006073426540626561, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    const Matrix x = gen_correlated(Seed{17}, 6, 32, 0.5);
    const Matrix dx = scaled(gen_normal(derive_seed(Seed{17}, 1), 6, 32), 0.1);
    const CholFactor l = inverse_cholesky(build_hessian(x, 0.01));
    const Matrix ref = compute_p_reference(dx, x, l);
    const Matrix fused = compute_p_fused(matmul_nt(dx, x), l);
    for (std::size_t i = 0; i < 36; ++i) {
      CHECK(std::abs(ref.data()[i] - golden[i]) <= 1e-12);
      CHECK(std::abs(fused.data()[i] - golden[i]) <= 1e-12);
    }
    CHECK(max_abs_diff(ref, fused) <= 1e-8);
  }
  SUBCASE("diagonal factor gives an elementwise product") {
    Matrix d(5, 5);
    for (std::size_t i = 0; i < 5; ++i) d(i, i) = 0.5 + static_cast<double>(i);
    const CholFactor l = factor_of(d);
    const Matrix g = gen_normal(Seed{11}, 5, 5);
    const Matrix p = compute_p_fused(g, l);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        const double expect = i < j ? g(i, j) * l.l(j, j) * l.l(j, j) : 0.0;
        CHECK(p(i, j) == doctest::Approx(expect).epsilon(1e-14));
      }
    CHECK(max_abs_diff(compute_p_reference_rows(g, l), p) <= 1e-14);
  }
  SUBCASE("fused equals reference across tile boundaries") {
    for (std::size_t n : {2, 7, 63, 64, 65, 130}) {
      const Matrix x = gen_correlated(derive_seed(Seed{12}, n), n, 2 * n + 5, 0.5);
      const Matrix dx = scaled(gen_normal(derive_seed(Seed{13}, n), n, 2 * n + 5), 0.2);
      const CholFactor l = inverse_cholesky(build_hessian(x, 0.01));
      const Matrix fused = compute_p_fused(matmul_nt(dx, x), l);
      CHECK(max_abs_diff(fused, compute_p_reference(dx, x, l)) <= 1e-8);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          REQUIRE(fused(i, j) == 0.0);
          REQUIRE_FALSE(std::signbit(fused(i, j)));
        }
    }
  }
  SUBCASE("shape errors") {
    const CholFactor l = factor_of(Matrix::identity(3));
    CHECK_THROWS_AS(compute_p_reference(Matrix(3, 4), Matrix(3, 5), l), ShapeError);
    CHECK_THROWS_AS(compute_p_reference(Matrix(2, 4), Matrix(2, 4), l), ShapeError);
    CHECK_THROWS_AS(compute_p_fused(Matrix(3, 4), l), ShapeError);
    CHECK_THROWS_AS(compute_p_fused(Matrix(4, 4), l), ShapeError);
  }
}
