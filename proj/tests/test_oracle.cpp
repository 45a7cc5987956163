// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "asymcal/engine.hpp"
#include "asymcal/error.hpp"
#include "asymcal/oracle.hpp"
#include "asymcal/random.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace asymcal;

namespace {

SingleRowProblem random_problem(std::uint64_t seed, std::size_t n, std::size_t k) {
  const Matrix w = gen_normal(derive_seed(Seed{seed}, 1), 1, n);
  const Matrix x = gen_correlated(derive_seed(Seed{seed}, 2), n, k, 0.5);
  const Matrix xt = add(x, scaled(gen_normal(derive_seed(Seed{seed}, 3), n, k), 0.3));
  return make_single_row_problem(w, x, xt);
}

}  // namespace

TEST_CASE("optimal_delta_w") {
  SUBCASE("nothing to fix") {
    const Matrix x = gen_normal(Seed{1}, 4, 12);
    const SingleRowProblem p = make_single_row_problem(gen_normal(Seed{2}, 1, 4), x, x);
    CHECK(max_abs(optimal_delta_w(p, 2, p.w(0, 2))) == 0.0);
  }
  SUBCASE("no residual gives the OBQ update") {
    const Matrix x = gen_normal(Seed{3}, 5, 20);
    const SingleRowProblem p = make_single_row_problem(gen_normal(Seed{4}, 1, 5), x, x);
    const double w_hat = p.w(0, 1) + 0.4;
    const Matrix dw = optimal_delta_w(p, 1, w_hat);
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(dw(0, j) == doctest::Approx(0.4 / p.hinv(1, 1) * p.hinv(1, j)).epsilon(1e-12));
  }
  SUBCASE("matches the dense KKT solve") {
    const SingleRowProblem p = random_problem(6, 6, 40);
    for (std::size_t q = 0; q < 6; ++q) {
      const double w_hat = std::round(p.w(0, q) * 4) / 4;
      const Matrix dw = optimal_delta_w(p, q, w_hat);
      const KktSolution kkt = kkt_delta_w(p, q, w_hat);
      CHECK(max_abs_diff(dw, kkt.delta_w) <= 1e-8);
      CHECK(std::abs(dw(0, q) - (w_hat - p.w(0, q))) <= 1e-10);
    }
  }
  SUBCASE("is a constrained minimizer") {
    const SingleRowProblem p = random_problem(7, 5, 30);
    const Matrix dw = optimal_delta_w(p, 3, 0.5);
    const double best = plugged_loss(p, dw);
    SplitMix64 g(Seed{8});
    for (int t = 0; t < 20; ++t) {
      Matrix other = dw;
      for (std::size_t j = 0; j < 5; ++j)
        if (j != 3) other(0, j) += 0.01 * (static_cast<double>(g.next_u64() % 200) - 100.0) / 100.0;
      CHECK(plugged_loss(p, other) >= best - 1e-12);
    }
  }
  SUBCASE("index out of range") {
    const SingleRowProblem p = random_problem(9, 3, 10);
    CHECK_THROWS_AS(optimal_delta_w(p, 3, 0.0), IndexError);
  }
}

TEST_CASE("loss_q") {
  SUBCASE("no residual gives the OBQ score") {
    const Matrix x = gen_normal(Seed{10}, 4, 16);
    const SingleRowProblem p = make_single_row_problem(gen_normal(Seed{11}, 1, 4), x, x);
    const double d = 0.3;
    CHECK(loss_q(p, 2, p.w(0, 2) + d) == doctest::Approx(d * d / p.hinv(2, 2)).epsilon(1e-12));
  }
  SUBCASE("unchanged weight leaves only the residual term") {
    const SingleRowProblem p = random_problem(12, 6, 40);
    const double lq = loss_q(p, 4, p.w(0, 4));
    const Matrix dw = optimal_delta_w(p, 4, p.w(0, 4));
    CHECK(lq >= 0.0);
    CHECK(lq == doctest::Approx(plugged_loss(p, dw)).epsilon(1e-10));
    double rr = 0.0;
    for (double v : p.r.data()) rr += v * v;
    CHECK(lq <= rr + 1e-12);
  }
  SUBCASE("closed form matches direct evaluation") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const SingleRowProblem p = random_problem(100 + s, 6, 40);
      for (std::size_t q = 0; q < 6; ++q) {
        const double w_hat = std::round(p.w(0, q) * 3) / 3;
        const double closed = loss_q(p, q, w_hat);
        const double direct = plugged_loss(p, optimal_delta_w(p, q, w_hat));
        CHECK(std::abs(closed - direct) <= 1e-8);
      }
    }
  }
}

TEST_CASE("greedy_optimal_quantize") {
  SUBCASE("n = 1") {
    const Matrix w = Matrix::from_rows({{0.37}, {-0.81}});
    const Matrix x = gen_normal(Seed{20}, 1, 8);
    const QuantParams params = fit_params_minmax(w, 4, false, 0);
    const GreedyResult g = greedy_optimal_quantize(w, x, x, params);
    for (std::size_t r = 0; r < 2; ++r) CHECK(g.w_hat(r, 0) == params.quantize(w(r, 0), r, 0));
  }
  SUBCASE("no asymmetry follows the OBQ score order") {
    const Matrix w = gen_normal(Seed{21}, 3, 2);
    const Matrix x = gen_correlated(Seed{22}, 2, 16, 0.5);
    const QuantParams params = fit_params_minmax(w, 3, false, 0);
    const GreedyResult g = greedy_optimal_quantize(w, x, x, params);
    for (std::size_t r = 0; r < 3; ++r) {
      const SingleRowProblem p = make_single_row_problem(w.block(r, 0, 1, 2), x, x, 0.01);
      double score[2];
      for (std::size_t q = 0; q < 2; ++q) {
        const double d = params.quantize(w(r, q), r, q) - w(r, q);
        score[q] = d * d / p.hinv(q, q);
      }
      CHECK(g.order[r][0] == (score[1] < score[0] ? 1u : 0u));
      for (std::size_t q = 0; q < 2; ++q)
        CHECK(params.quantize(g.w_hat(r, q), r, q) == doctest::Approx(g.w_hat(r, q)));
    }
  }
  SUBCASE("seed-9 instance: ordering effect is marginal") {
    const Matrix w = gen_normal(derive_seed(Seed{9}, 1), 4, 8);
    const Matrix x = gen_correlated(derive_seed(Seed{9}, 2), 8, 32, 0.5);
    const Matrix xt = add(x, scaled(gen_normal(derive_seed(Seed{9}, 3), 8, 32), 0.3));
    const QuantParams params = fit_params_minmax(w, 4, false, 0);
    const GreedyResult g = greedy_optimal_quantize(w, x, xt, params);
    const LayerResult naive = naive_engine(w, x, xt, params);
    MESSAGE("greedy ", g.asym_loss, " fixed order ", naive.asym_loss);
    // Per-step argmin carries no global guarantee; greedy lands 3.9% above fixed order here.
    CHECK(std::isfinite(g.asym_loss));
    CHECK(std::abs(g.asym_loss - naive.asym_loss) <= 0.1 * naive.asym_loss);
  }
  SUBCASE("size cap") {
    const Matrix w(1, 17);
    CHECK_THROWS_AS(greedy_optimal_quantize(w, Matrix(17, 4), Matrix(17, 4),
                                            fit_params_minmax(w, 4, false, 0)),
                    CapabilityError);
  }
}

TEST_CASE("naive_engine") {
  SUBCASE("no asymmetry equals the GPTQ engine") {
    const Matrix w = gen_normal(Seed{30}, 5, 10);
    const Matrix x = gen_correlated(Seed{31}, 10, 40, 0.5);
    QuantConfig cfg;
    cfg.mode = CalibMode::Gptq;
    const LayerResult eng = calibrate_layer(w, x, x, cfg);
    const LayerResult naive = naive_engine(w, x, x, eng.params);
    CHECK(max_abs_diff(eng.q, naive.q) <= 1e-9);
  }
  SUBCASE("seed-5 instance") {
    const Matrix w = gen_normal(derive_seed(Seed{5}, 1), 4, 8);
    const Matrix x = gen_correlated(derive_seed(Seed{5}, 2), 8, 32, 0.5);
    const Matrix xt = add(x, scaled(gen_normal(derive_seed(Seed{5}, 3), 8, 32), 0.3));
    QuantConfig cfg;
    const LayerResult eng = calibrate_layer(w, x, xt, cfg);
    const LayerResult naive = naive_engine(w, x, xt, eng.params);
    cfg.mode = CalibMode::Rtn;
    const LayerResult rtn = calibrate_layer(w, x, xt, cfg);
    CHECK(std::isfinite(naive.asym_loss));
    CHECK(naive.asym_loss <= rtn.asym_loss);
    CHECK(eng.asym_loss <= 2.0 * naive.asym_loss);
  }
  SUBCASE("size cap") {
    const Matrix w(1, 65);
    CHECK_THROWS_AS(
        naive_engine(w, Matrix(65, 4), Matrix(65, 4), fit_params_minmax(w, 4, false, 0)),
        CapabilityError);
  }
}
