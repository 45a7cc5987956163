// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

// Slow reference implementations used to validate the engine. Nothing here
// is tuned; every routine favours the most direct formulation.

#pragma once

#include <cstddef>
#include <vector>

#include "asymcal/engine.hpp"
#include "asymcal/quantizer.hpp"
#include "asymcal/tensor.hpp"

namespace asymcal {

/// One output row: minimise ‖Δw·X − r‖² subject to w_q + Δw_q = ŵ_q.
struct SingleRowProblem {
  Matrix w;     // 1×n
  Matrix x;     // n×k
  Matrix r;     // 1×k, w·X̃ − w·X
  Matrix h;     // n×n, X·Xᵀ + λI
  Matrix hinv;  // n×n, h⁻¹
};

/// Builds the problem for row `w` with H = X·Xᵀ + damp_ratio·mean(diag)·I.
/// With damp_ratio = 0 X must have full row rank.
SingleRowProblem make_single_row_problem(const Matrix& w, const Matrix& x,
                                         const Matrix& x_tilde, double damp_ratio = 0.0);

/// Closed-form constrained optimum:
/// Δw = (ŵ_q − w_q)/H⁻¹_qq · H⁻¹_{q,:} + r·Xᵀ·H⁻¹_{−q}.
Matrix optimal_delta_w(const SingleRowProblem& p, std::size_t q, double w_hat_q);

/// Closed-form loss at the optimum:
/// (ŵ_q−w_q)²/H⁻¹_qq + r·rᵀ − r·Xᵀ·H⁻¹_{−q}·X·rᵀ − 2(ŵ_q−w_q)/H⁻¹_qq · r·Xᵀ·H⁻¹_{:,q}.
double loss_q(const SingleRowProblem& p, std::size_t q, double w_hat_q);

/// ‖Δw·X − r‖², evaluated by direct summation.
double plugged_loss(const SingleRowProblem& p, const Matrix& delta_w);

struct KktSolution {
  Matrix delta_w;  // 1×n
  double multiplier = 0.0;
};

/// Solves the bordered system [2H e_qᵀ; e_q 0]·[Δwᵀ; μ] = [2X·rᵀ; ŵ_q − w_q]
/// with a dense LU factorization.
KktSolution kkt_delta_w(const SingleRowProblem& p, std::size_t q, double w_hat_q);

struct GreedyResult {
  Matrix w_hat;
  /// Per row, the order in which indices were quantized.
  std::vector<std::vector<std::size_t>> order;
  double asym_loss = 0.0;
};

inline constexpr std::size_t kGreedyMaxN = 16;
inline constexpr std::size_t kNaiveMaxN = 64;

/// Per row: repeatedly pick the remaining index with smallest L_q (ties to
/// the lower index), quantize it, apply the optimal Δw, consume the part of
/// the residual the second term covered, and eliminate the index.
GreedyResult greedy_optimal_quantize(const Matrix& w, const Matrix& x, const Matrix& x_tilde,
                                     const QuantParams& params, double damp_ratio = 0.01);

/// First-to-last column processing with the full residual matrix R kept
/// and explicitly eliminated inverse Hessians; O(m·n·k) per column.
LayerResult naive_engine(const Matrix& w, const Matrix& x, const Matrix& x_tilde,
                         const QuantParams& params, double damp_ratio = 0.01);

}  // namespace asymcal
