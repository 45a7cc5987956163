// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/linalg.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "asymcal/error.hpp"
#include "asymcal/runtime.hpp"
#include "eigen_view.hpp"

namespace asymcal {

namespace {

void require_square(const Matrix& m, const char* op) {
  if (m.rows() != m.cols()) {
    throw ShapeError(std::string(op) + ": expected a square matrix, got " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void mirror_lower(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) m(i, j) = m(j, i);
}

// Tile edge for the fused P kernel; tuned for L2-resident operands.
constexpr std::size_t kTile = 64;

}  // namespace

HessianState build_hessian(const Matrix& x, double damp_ratio) {
  if (x.rows() < 1 || x.cols() < 1) {
    throw ValidationError("build_hessian: X must be at least 1x1");
  }
  if (!(damp_ratio >= 0.0) || !std::isfinite(damp_ratio)) {
    throw ValidationError("build_hessian: damp_ratio must be finite and >= 0");
  }
  HessianState state;
  state.n = x.rows();
  state.h = gram(x.dtype() == DType::F64 ? x : x.as(DType::F64));

  double mean_diag = 0.0;
  for (std::size_t i = 0; i < state.n; ++i) mean_diag += state.h(i, i);
  mean_diag /= static_cast<double>(state.n);
  if (!(mean_diag > 0.0)) {
    throw DegenerateInputError("build_hessian: mean Hessian diagonal is zero");
  }
  state.damp_lambda = damp_ratio * mean_diag;
  for (std::size_t i = 0; i < state.n; ++i) {
    if (state.h(i, i) == 0.0) state.dead_channels.push_back(i);
    state.h(i, i) += state.damp_lambda;
  }
  return state;
}

Matrix cholesky_lower(const Matrix& a) {
  require_square(a, "cholesky_lower");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  auto lv = detail::view(l);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j <= i; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double s = a(i, j) - lv.row(ii).head(jj).dot(lv.row(jj).head(jj));
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) {
          throw FactorizationError(
              i, "cholesky: non-positive pivot at index " + std::to_string(i));
        }
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

Matrix invert_lower(const Matrix& l) {
  require_square(l, "invert_lower");
  Matrix inv = Matrix::identity(l.rows());
  if (l.rows() == 0) return inv;
  detail::view(l).triangularView<Eigen::Lower>().solveInPlace(detail::view(inv));
  return inv;
}

Matrix inverse_hessian(const HessianState& h) {
  const Matrix linv = invert_lower(cholesky_lower(h.h));
  // H⁻¹ = L⁻ᵀ·L⁻¹; only the lower half is formed, then mirrored.
  const std::size_t n = linv.rows();
  Matrix hinv(n, n);
  auto hv = detail::view(hinv);
  hv.triangularView<Eigen::Lower>() =
      detail::view(linv).transpose() * detail::view(linv);
  mirror_lower(hinv);
  return hinv;
}

CholFactor inverse_cholesky_of(const Matrix& hinv) {
  require_square(hinv, "inverse_cholesky");
  return CholFactor{cholesky_lower(hinv), hinv.rows()};
}

CholFactor inverse_cholesky(const HessianState& h) {
  return inverse_cholesky_of(inverse_hessian(h));
}

Matrix ge_eliminate(const Matrix& hinv, std::size_t q) {
  require_square(hinv, "ge_eliminate");
  const std::size_t n = hinv.rows();
  if (q >= n) throw IndexError("ge_eliminate: index " + std::to_string(q) + " out of range");
  const double pivot = hinv(q, q);
  if (pivot == 0.0 || !std::isfinite(pivot)) {
    throw EliminationError("ge_eliminate: zero pivot at index " + std::to_string(q));
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = hinv(i, q) / pivot;
    for (std::size_t j = 0; j < n; ++j) out(i, j) = hinv(i, j) - f * hinv(q, j);
  }
  for (std::size_t i = 0; i < n; ++i) {
    out(i, q) = 0.0;
    out(q, i) = 0.0;
  }
  return out;
}

Matrix chol_slice_hinv(const CholFactor& l, std::size_t q) {
  if (q >= l.n) {
    throw IndexError("chol_slice_hinv: index " + std::to_string(q) + " out of range for n=" +
                     std::to_string(l.n));
  }
  const std::size_t s = l.n - q;
  Matrix out(s, s);
  const auto tail = detail::sub(l.l, q, q, s, s);
  detail::view(out).noalias() = tail * tail.transpose();
  return out;
}

namespace {

// Row q of P from g = (ΔX·Xᵀ)[q, :]: two dense vector–matrix products over
// the trailing slice of L, written as plain loops.
void p_row_reference(std::span<const double> g, const Matrix& l, std::size_t q,
                     std::vector<double>& scratch, std::span<double> out) {
  const std::size_t n = l.rows();
  const std::size_t s = q + 1;
  std::fill(out.begin(), out.end(), 0.0);
  if (s >= n) return;
  scratch.assign(n, 0.0);
  for (std::size_t r = s; r < n; ++r) {
    const double gr = g[r];
    const auto lr = l.row(r);
    for (std::size_t c = s; c < n; ++c) scratch[c] += gr * lr[c];
  }
  for (std::size_t j = s; j < n; ++j) {
    const auto lj = l.row(j);
    double acc = 0.0;
    for (std::size_t c = s; c < n; ++c) acc += scratch[c] * lj[c];
    out[j] = acc;
  }
}

}  // namespace

Matrix compute_p_reference(const Matrix& dx, const Matrix& x, const CholFactor& l) {
  if (dx.rows() != x.rows() || dx.cols() != x.cols()) {
    throw ShapeError("compute_p_reference: dX and X must have the same shape");
  }
  if (l.n != x.rows()) throw ShapeError("compute_p_reference: factor size does not match X");
  const std::size_t n = l.n;
  const std::size_t k = x.cols();
  Matrix p(n, n);
  std::vector<double> g(n);
  std::vector<double> scratch;
  for (std::size_t q = 0; q < n; ++q) {
    const auto dq = dx.row(q);
    for (std::size_t c = 0; c < n; ++c) {
      const auto xc = x.row(c);
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += dq[t] * xc[t];
      g[c] = acc;
    }
    p_row_reference(g, l.l, q, scratch, p.row(q));
  }
  return p;
}

Matrix compute_p_reference_rows(const Matrix& dx_xt, const CholFactor& l) {
  require_square(dx_xt, "compute_p_reference_rows");
  if (dx_xt.rows() != l.n) throw ShapeError("compute_p_reference_rows: size mismatch");
  Matrix p(l.n, l.n);
  std::vector<double> scratch;
  for (std::size_t q = 0; q < l.n; ++q) p_row_reference(dx_xt.row(q), l.l, q, scratch, p.row(q));
  return p;
}

Matrix compute_p_fused(const Matrix& dx_xt, const CholFactor& l) {
  require_square(dx_xt, "compute_p_fused");
  if (dx_xt.rows() != l.n) throw ShapeError("compute_p_fused: size mismatch");
  const std::size_t n = l.n;
  Matrix o(n, n);
  Matrix p(n, n);
  if (n < 2) return p;

  const std::size_t tiles = (n + kTile - 1) / kTile;

  // Row tile I touches only O[I, I:] and P[I, I:], so tiles are independent.
  auto run_row_tile = [&](std::size_t t) {
    const std::size_t i0 = t * kTile;
    const std::size_t bi = std::min(kTile, n - i0);
    // O = (ΔX·Xᵀ·L) ⊙ M_U. L is lower triangular, so O[i, c] only needs
    // ΔX·Xᵀ[i, c:] and L[c:, c]; tiles left of the diagonal tile are masked.
    for (std::size_t c0 = i0; c0 < n; c0 += kTile) {
      const std::size_t bc = std::min(kTile, n - c0);
      detail::sub(o, i0, c0, bi, bc).noalias() =
          detail::sub(dx_xt, i0, c0, bi, n - c0) * detail::sub(l.l, c0, c0, n - c0, bc);
    }
    for (std::size_t i = 0; i < bi; ++i)
      for (std::size_t c = i0; c <= i0 + i; ++c) o(i0 + i, c) = 0.0;
    // P = O·Lᵀ. O[i, a] vanishes for a ≤ i and L[j, a] for a > j, so
    // P[I, J] only needs O[I, I : J+bj] and L[J, I : J+bj].
    for (std::size_t j0 = i0; j0 < n; j0 += kTile) {
      const std::size_t bj = std::min(kTile, n - j0);
      const std::size_t span = j0 + bj - i0;
      detail::sub(p, i0, j0, bi, bj).noalias() =
          detail::sub(o, i0, i0, bi, span) * detail::sub(l.l, j0, i0, bj, span).transpose();
    }
    for (std::size_t i = 0; i < bi; ++i)
      for (std::size_t j = i0; j <= i0 + i; ++j) p(i0 + i, j) = 0.0;
  };

  const unsigned workers = std::min<unsigned>(thread_budget(), static_cast<unsigned>(tiles));
  if (workers <= 1) {
    for (std::size_t t = 0; t < tiles; ++t) run_row_tile(t);
    return p;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < tiles; t += workers) run_row_tile(t);
      });
    }
  }
  return p;
}

}  // namespace asymcal
