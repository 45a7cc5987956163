// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/oracle.hpp"

#include <Eigen/LU>

#include <chrono>
#include <string>

#include "asymcal/error.hpp"
#include "asymcal/linalg.hpp"
#include "eigen_view.hpp"

namespace asymcal {

namespace {

// Row vector times matrix with plain loops.
std::vector<double> vec_mat(std::span<const double> v, const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += v[i] * m(i, j);
  return out;
}

// r·Xᵀ, length n.
std::vector<double> r_xt(const Matrix& r, const Matrix& x) {
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t t = 0; t < x.cols(); ++t) out[i] += r(0, t) * x(i, t);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_index(const SingleRowProblem& p, std::size_t q) {
  if (q >= p.w.cols()) throw IndexError("oracle: index " + std::to_string(q) + " out of range");
}

}  // namespace

SingleRowProblem make_single_row_problem(const Matrix& w, const Matrix& x, const Matrix& x_tilde,
                                         double damp_ratio) {
  if (w.rows() != 1 || w.cols() != x.rows()) {
    throw ShapeError("make_single_row_problem: w must be 1×n with n = X.rows");
  }
  if (x.rows() != x_tilde.rows() || x.cols() != x_tilde.cols()) {
    throw ShapeError("make_single_row_problem: X and X_tilde differ in shape");
  }
  SingleRowProblem p;
  p.w = w.as(DType::F64);
  p.x = x.as(DType::F64);
  p.r = sub(matmul(p.w, x_tilde.as(DType::F64)), matmul(p.w, p.x));
  const HessianState hs = build_hessian(p.x, damp_ratio);
  p.h = hs.h;
  p.hinv = inverse_hessian(hs);
  return p;
}

Matrix optimal_delta_w(const SingleRowProblem& p, std::size_t q, double w_hat_q) {
  check_index(p, q);
  const double hqq = p.hinv(q, q);
  if (hqq == 0.0) throw EliminationError("optimal_delta_w: zero pivot at " + std::to_string(q));
  const Matrix hq = ge_eliminate(p.hinv, q);
  const auto second = vec_mat(r_xt(p.r, p.x), hq);
  const double scale = (w_hat_q - p.w(0, q)) / hqq;
  Matrix dw(1, p.w.cols());
  for (std::size_t j = 0; j < dw.cols(); ++j) dw(0, j) = scale * p.hinv(q, j) + second[j];
  return dw;
}

double loss_q(const SingleRowProblem& p, std::size_t q, double w_hat_q) {
  check_index(p, q);
  const double hqq = p.hinv(q, q);
  if (hqq == 0.0) throw EliminationError("loss_q: zero pivot at " + std::to_string(q));
  const double delta = w_hat_q - p.w(0, q);
  const Matrix hq = ge_eliminate(p.hinv, q);
  const auto rx = r_xt(p.r, p.x);
  const double rr = dot(p.r.row(0), p.r.row(0));
  const double quad = dot(vec_mat(rx, hq), rx);
  std::vector<double> hcol(p.hinv.rows());
  for (std::size_t i = 0; i < hcol.size(); ++i) hcol[i] = p.hinv(i, q);
  const double cross = dot(rx, hcol);
  return delta * delta / hqq + rr - quad - 2.0 * delta / hqq * cross;
}

double plugged_loss(const SingleRowProblem& p, const Matrix& delta_w) {
  if (delta_w.rows() != 1 || delta_w.cols() != p.x.rows()) {
    throw ShapeError("plugged_loss: delta_w must be 1×n");
  }
  double s = 0.0;
  for (std::size_t t = 0; t < p.x.cols(); ++t) {
    double v = -p.r(0, t);
    for (std::size_t i = 0; i < p.x.rows(); ++i) v += delta_w(0, i) * p.x(i, t);
    s += v * v;
  }
  return s;
}

KktSolution kkt_delta_w(const SingleRowProblem& p, std::size_t q, double w_hat_q) {
  check_index(p, q);
  const auto n = static_cast<Eigen::Index>(p.w.cols());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  a.topLeftCorner(n, n) = 2.0 * detail::view(p.h);
  a(static_cast<Eigen::Index>(q), n) = 1.0;
  a(n, static_cast<Eigen::Index>(q)) = 1.0;
  const auto rx = r_xt(p.r, p.x);
  for (Eigen::Index i = 0; i < n; ++i) rhs(i) = 2.0 * rx[static_cast<std::size_t>(i)];
  rhs(n) = w_hat_q - p.w(0, q);
  const Eigen::VectorXd sol = a.partialPivLu().solve(rhs);
  KktSolution out;
  out.delta_w = Matrix(1, p.w.cols());
  for (Eigen::Index i = 0; i < n; ++i) out.delta_w(0, static_cast<std::size_t>(i)) = sol(i);
  out.multiplier = sol(n);
  return out;
}

GreedyResult greedy_optimal_quantize(const Matrix& w_in, const Matrix& x, const Matrix& x_tilde,
                                     const QuantParams& params, double damp_ratio) {
  const std::size_t n = w_in.cols();
  if (n > kGreedyMaxN) {
    throw CapabilityError("greedy_optimal_quantize: n = " + std::to_string(n) +
                          " exceeds the limit of " + std::to_string(kGreedyMaxN));
  }
  if (params.rows != w_in.rows() || params.cols != n) {
    throw ShapeError("greedy_optimal_quantize: params do not match W");
  }
  const Matrix w = w_in.as(DType::F64);
  GreedyResult out;
  out.w_hat = Matrix(w.rows(), n);
  for (std::size_t row = 0; row < w.rows(); ++row) {
    SingleRowProblem p = make_single_row_problem(w.block(row, 0, 1, n), x, x_tilde, damp_ratio);
    std::vector<bool> done(n, false);
    std::vector<std::size_t> order;
    for (std::size_t step = 0; step < n; ++step) {
      std::size_t best = n;
      double best_loss = 0.0;
      for (std::size_t q = 0; q < n; ++q) {
        if (done[q]) continue;
        const double lq = loss_q(p, q, params.quantize(p.w(0, q), row, q));
        if (best == n || lq < best_loss) {
          best = q;
          best_loss = lq;
        }
      }
      const double w_hat = params.quantize(p.w(0, best), row, best);
      const Matrix hq = ge_eliminate(p.hinv, best);
      const auto s = vec_mat(r_xt(p.r, p.x), hq);
      const Matrix dw = optimal_delta_w(p, best, w_hat);
      for (std::size_t j = 0; j < n; ++j) p.w(0, j) += dw(0, j);
      p.w(0, best) = w_hat;
      for (std::size_t t = 0; t < p.x.cols(); ++t) {
        double covered = 0.0;
        for (std::size_t i = 0; i < n; ++i) covered += s[i] * p.x(i, t);
        p.r(0, t) -= covered;
      }
      p.hinv = hq;
      done[best] = true;
      order.push_back(best);
    }
    for (std::size_t j = 0; j < n; ++j) out.w_hat(row, j) = p.w(0, j);
    out.order.push_back(std::move(order));
  }
  out.asym_loss = asym_loss(out.w_hat, w, x, x_tilde);
  return out;
}

LayerResult naive_engine(const Matrix& w_in, const Matrix& x_in, const Matrix& xt_in,
                         const QuantParams& params, double damp_ratio) {
  const std::size_t n = w_in.cols();
  if (n > kNaiveMaxN) {
    throw CapabilityError("naive_engine: n = " + std::to_string(n) + " exceeds the limit of " +
                          std::to_string(kNaiveMaxN));
  }
  if (x_in.rows() != n || xt_in.rows() != n || x_in.cols() != xt_in.cols()) {
    throw ShapeError("naive_engine: X and X_tilde must both be n×k");
  }
  if (params.rows != w_in.rows() || params.cols != n) {
    throw ShapeError("naive_engine: params do not match W");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Matrix w0 = w_in.as(DType::F64);
  const Matrix x = x_in.as(DType::F64);
  const Matrix xt = xt_in.as(DType::F64);
  const std::size_t m = w0.rows();
  const std::size_t k = x.cols();

  Matrix w = w0;
  Matrix r = matmul(w0, sub(xt, x));  // m×k
  Matrix hinv = inverse_hessian(build_hessian(x, damp_ratio));

  for (std::size_t q = 0; q < n; ++q) {
    const double hqq = hinv(q, q);
    const Matrix hq = ge_eliminate(hinv, q);
    for (std::size_t row = 0; row < m; ++row) {
      const double w_hat = params.quantize(w(row, q), row, q);
      const double scale = (w_hat - w(row, q)) / hqq;
      std::vector<double> rx(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < k; ++t) rx[i] += r(row, t) * x(i, t);
      const auto s = vec_mat(rx, hq);
      for (std::size_t j = 0; j < n; ++j) w(row, j) += scale * hinv(q, j) + s[j];
      w(row, q) = w_hat;
      for (std::size_t t = 0; t < k; ++t) {
        double covered = 0.0;
        for (std::size_t i = 0; i < n; ++i) covered += s[i] * x(i, t);
        r(row, t) -= covered;
      }
    }
    hinv = hq;
  }

  LayerResult res;
  res.q = w;
  res.params = params;
  res.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.perm[i] = i;
  res.sym_loss = asym_loss(w, w0, x, x);
  res.asym_loss = asym_loss(w, w0, x, xt);
  res.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(
      std::chrono::steady_clock::now() - t0);
  return res;
}

}  // namespace asymcal
