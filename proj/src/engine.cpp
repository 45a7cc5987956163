// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/engine.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "asymcal/error.hpp"
#include "eigen_view.hpp"

namespace asymcal {

namespace {

constexpr std::size_t kNanGuardStride = 16;

std::vector<std::size_t> identity_perm(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

Matrix permute_symmetric(const Matrix& h, std::span<const std::size_t> perm) {
  const std::size_t n = h.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = h(perm[i], perm[j]);
  return out;
}

std::vector<std::size_t> zero_rows(const Matrix& x) {
  std::vector<std::size_t> dead;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) dead.push_back(r);
  }
  return dead;
}

void check_finite_columns(const Matrix& m, std::size_t c0, std::size_t c1,
                          std::span<const std::size_t> perm, const char* what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = c0; c < c1; ++c) {
      if (!std::isfinite(m(r, c))) {
        throw CalibrationError(perm[c], std::string("non-finite ") + what + " at column " +
                                            std::to_string(perm[c]) + ", row " +
                                            std::to_string(r));
      }
    }
  }
}

}  // namespace

std::string_view to_string(CalibMode mode) noexcept {
  switch (mode) {
    case CalibMode::Rtn: return "rtn";
    case CalibMode::Gptq: return "gptq";
    case CalibMode::GptaqSecondOnly: return "gptaq2";
    case CalibMode::Gptaq: return "gptaq";
  }
  return "?";
}

std::string_view to_string(AqOrder order) noexcept {
  return order == AqOrder::WThenA ? "wa" : "aw";
}

std::string_view to_string(ClipSearch clip) noexcept {
  return clip == ClipSearch::Mse ? "mse" : "minmax";
}

CalibMode parse_mode(std::string_view s) {
  if (s == "rtn") return CalibMode::Rtn;
  if (s == "gptq") return CalibMode::Gptq;
  if (s == "gptaq2") return CalibMode::GptaqSecondOnly;
  if (s == "gptaq") return CalibMode::Gptaq;
  throw ValidationError("unknown mode '" + std::string(s) + "'");
}

AqOrder parse_aq_order(std::string_view s) {
  if (s == "wa") return AqOrder::WThenA;
  if (s == "aw") return AqOrder::AThenW;
  throw ValidationError("unknown aq-order '" + std::string(s) + "'");
}

ClipSearch parse_clip(std::string_view s) {
  if (s == "minmax") return ClipSearch::MinMax;
  if (s == "mse") return ClipSearch::Mse;
  throw ValidationError("unknown clip search '" + std::string(s) + "'");
}

void QuantConfig::validate() const {
  validate_bits(bits);
  if (block_size < 1) throw ValidationError("block_size must be >= 1");
  if (!std::isfinite(damp_ratio) || damp_ratio < 0.0) {
    throw ValidationError("damp_ratio must be finite and >= 0");
  }
  validate_bits(act_cfg.bits);
  if (!(act_cfg.clip_ratio > 0.0 && act_cfg.clip_ratio <= 1.0)) {
    throw ValidationError("act clip_ratio must lie in (0, 1]");
  }
}

std::vector<std::size_t> act_order_perm(const HessianState& h) {
  std::vector<std::size_t> perm = identity_perm(h.n);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return h.h(a, a) > h.h(b, b); });
  return perm;
}

std::uint64_t column_hash(const Matrix& m, std::size_t col) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto bits = std::bit_cast<std::uint64_t>(m(r, col));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

double asym_loss(const Matrix& w_hat, const Matrix& w, const Matrix& x, const Matrix& x_tilde) {
  if (w_hat.rows() != w.rows() || w_hat.cols() != w.cols()) {
    throw ShapeError("asym_loss: W_hat and W differ in shape");
  }
  if (x.rows() != x_tilde.rows() || x.cols() != x_tilde.cols()) {
    throw ShapeError("asym_loss: X and X_tilde differ in shape");
  }
  if (w.cols() != x.rows()) throw ShapeError("asym_loss: W and X are not conformable");
  return frobenius_sq(sub(matmul(w_hat.as(DType::F64), x.as(DType::F64)),
                          matmul(w.as(DType::F64), x_tilde.as(DType::F64))));
}

LayerResult calibrate_layer(const Matrix& w_in, const Matrix& x_in, const Matrix& xt_in,
                            const QuantConfig& cfg, LayerTrace* trace) {
  cfg.validate();
  if (w_in.cols() != x_in.rows()) {
    throw ShapeError("calibrate_layer: W is " + std::to_string(w_in.rows()) + "x" +
                     std::to_string(w_in.cols()) + " but X has " + std::to_string(x_in.rows()) +
                     " rows");
  }
  if (x_in.rows() != xt_in.rows() || x_in.cols() != xt_in.cols()) {
    throw ShapeError("calibrate_layer: X and X_tilde differ in shape");
  }
  if (w_in.cols() == 0 || w_in.rows() == 0) throw ShapeError("calibrate_layer: empty W");

  const auto t0 = std::chrono::steady_clock::now();
  const Matrix w = w_in.as(DType::F64);
  const Matrix x = x_in.as(DType::F64);
  const Matrix xt = xt_in.as(DType::F64);
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();

  LayerResult res;
  if (cfg.mode == CalibMode::Rtn) {
    res.perm = identity_perm(n);
    res.dead_channels = zero_rows(x);
    res.params = fit_params(w, cfg.bits, cfg.symmetric, cfg.group_size, cfg.clip_search);
    res.q = quantize_rtn(w, res.params).w_hat;
  } else {
    HessianState hs = build_hessian(x, cfg.damp_ratio);
    res.dead_channels = hs.dead_channels;
    res.perm = cfg.act_order ? act_order_perm(hs) : identity_perm(n);
    Matrix wp = w;
    Matrix xp = x;
    Matrix xtp = xt;
    std::vector<bool> dead(n, false);
    if (cfg.act_order) {
      hs.h = permute_symmetric(hs.h, res.perm);
      wp = permute_columns(w, res.perm);
      xp = permute_rows(x, res.perm);
      xtp = permute_rows(xt, res.perm);
      const auto pos = invert_permutation(res.perm);
      for (std::size_t d : res.dead_channels) dead[pos[d]] = true;
    } else {
      for (std::size_t d : res.dead_channels) dead[d] = true;
    }

    res.params = fit_params(wp, cfg.bits, cfg.symmetric, cfg.group_size, cfg.clip_search);
    const CholFactor l = inverse_cholesky(hs);

    const bool first = cfg.mode != CalibMode::GptaqSecondOnly;
    const bool second = cfg.mode == CalibMode::Gptaq || cfg.mode == CalibMode::GptaqSecondOnly;
    Matrix p;
    if (second) {
      p = compute_p_fused(matmul_nt(sub(xtp, xp), xp), l);
      for (std::size_t d = 0; d < n; ++d) {
        if (!dead[d]) continue;
        auto row = p.row(d);
        std::fill(row.begin(), row.end(), 0.0);
      }
    }

    const std::size_t bsz = std::min(cfg.block_size, n);
    Matrix wk = std::move(wp);
    Matrix q(m, n);
    Matrix e(m, bsz);
    Matrix wblk(m, bsz);
    if (trace) {
      trace->w_start = Matrix(m, n);
      trace->q_hash_at_write.assign(n, 0);
    }

    for (std::size_t i0 = 0; i0 < n; i0 += bsz) {
      const std::size_t b = std::min(bsz, n - i0);
      const std::size_t i1 = i0 + b;
      for (std::size_t jj = 0; jj < b; ++jj) {
        const std::size_t j = i0 + jj;
        const double ljj = l.l(j, j);
        for (std::size_t r = 0; r < m; ++r) {
          const double wj = wk(r, j);
          const double qv = res.params.quantize(wj, r, j);
          wblk(r, jj) = wj;
          q(r, j) = qv;
          e(r, jj) = (wj - qv) / ljj;
        }
        if (trace) {
          for (std::size_t r = 0; r < m; ++r) trace->w_start(r, j) = wblk(r, jj);
          trace->q_hash_at_write[j] = column_hash(q, j);
        }
        if (j + 1 < i1) {
          for (std::size_t r = 0; r < m; ++r) {
            const double er = e(r, jj);
            const double wr = wblk(r, jj);
            auto wrow = wk.row(r);
            for (std::size_t c = j + 1; c < i1; ++c) {
              double delta = first ? -er * l.l(c, j) : 0.0;
              if (second) delta += wr * p(j, c);
              wrow[c] += delta;
            }
          }
        }
        if ((j + 1) % kNanGuardStride == 0 || j + 1 == n) {
          const std::size_t lo = j + 1 >= kNanGuardStride ? j + 1 - kNanGuardStride : 0;
          check_finite_columns(q, lo, j + 1, res.perm, "quantized weight");
          check_finite_columns(wk, j + 1, i1, res.perm, "working weight");
        }
      }
      const std::size_t rest = n - i1;
      if (rest == 0) continue;
      auto tail = detail::sub(wk, 0, i1, m, rest);
      if (first) {
        tail.noalias() -= detail::sub(e, 0, 0, m, b) * detail::sub(l.l, i1, i0, rest, b).transpose();
      }
      if (second) {
        tail.noalias() += detail::sub(wblk, 0, 0, m, b) * detail::sub(p, i0, i1, b, rest);
      }
    }

    res.q = unpermute_columns(q, res.perm);
    if (trace) {
      trace->p = std::move(p);
      trace->l = l;
    }
  }

  res.sym_loss = asym_loss(res.q, w, x, x);
  res.asym_loss = asym_loss(res.q, w, x, xt);
  res.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(
      std::chrono::steady_clock::now() - t0);
  if (!std::isfinite(res.sym_loss) || !std::isfinite(res.asym_loss)) {
    throw CalibrationError(0, "calibrate_layer: non-finite loss");
  }
  return res;
}

}  // namespace asymcal
