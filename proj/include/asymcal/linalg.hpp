// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "asymcal/tensor.hpp"

namespace asymcal {

/// Dampened layer Hessian H = X·Xᵀ + λ·I.
struct HessianState {
  Matrix h;
  double damp_lambda = 0.0;
  std::size_t n = 0;
  /// Channels whose diagonal was exactly zero before dampening.
  std::vector<std::size_t> dead_channels;
};

/// Lower-triangular L with L·Lᵀ = H⁻¹ (the dampened inverse Hessian).
struct CholFactor {
  Matrix l;
  std::size_t n = 0;
};

/// λ = damp_ratio × mean(diag(X·Xᵀ)). Throws DegenerateInputError when that
/// mean is zero.
HessianState build_hessian(const Matrix& x, double damp_ratio);

/// Lower Cholesky factor of a symmetric positive-definite matrix. Throws
/// FactorizationError carrying the index of the first non-positive pivot.
Matrix cholesky_lower(const Matrix& a);

/// L⁻¹ for lower-triangular L by forward substitution.
Matrix invert_lower(const Matrix& l);

/// H⁻¹ via Cholesky of H and two triangular solves; exactly symmetric.
Matrix inverse_hessian(const HessianState& h);

/// Cholesky factor of H⁻¹: factorize H, invert, factorize the inverse.
CholFactor inverse_cholesky(const HessianState& h);
CholFactor inverse_cholesky_of(const Matrix& hinv);

/// One Gaussian-elimination step on an inverse Hessian:
/// H⁻¹ − H⁻¹[:,q]·H⁻¹[q,:] / H⁻¹[q][q], with row and column q set to exact zero.
Matrix ge_eliminate(const Matrix& hinv, std::size_t q);

/// Trailing product L[q:,q:]·L[q:,q:]ᵀ, size (n−q)×(n−q). Equals the
/// trailing block of H⁻¹ after eliminating indices 0..q−1.
Matrix chol_slice_hinv(const CholFactor& l, std::size_t q);

/// Row-loop construction of the residual-correction matrix: row q is
/// (ΔX·Xᵀ)[q, q+1:] · L[q+1:,q+1:] · L[q+1:,q+1:]ᵀ, each slice product taken
/// densely. `dx` and `x` are n×k.
Matrix compute_p_reference(const Matrix& dx, const Matrix& x, const CholFactor& l);

/// Same construction with ΔX·Xᵀ supplied.
Matrix compute_p_reference_rows(const Matrix& dx_xt, const CholFactor& l);

/// P = ((ΔX·Xᵀ·L) ⊙ M_U)·Lᵀ with M_U the strict upper mask, evaluated as a
/// tiled GEMM that skips tiles known to be zero. Strictly upper triangular;
/// entries at and below the diagonal are +0.0.
Matrix compute_p_fused(const Matrix& dx_xt, const CholFactor& l);

}  // namespace asymcal
