// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "asymcal/error.hpp"

namespace asymcal {

namespace {

struct Grid {
  double scale;
  std::int32_t zero;
  bool floored;
};

Grid grid_from_range(double lo, double hi, int bits, bool symmetric) {
  if (symmetric) {
    const double amax = std::max(std::abs(lo), std::abs(hi));
    const double qmax = static_cast<double>((1 << (bits - 1)) - 1);
    if (!(amax > 0.0)) return {kScaleFloor, 0, true};
    return {std::max(amax / qmax, kScaleFloor), 0, false};
  }
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  const double maxq = static_cast<double>((1 << bits) - 1);
  if (!(hi - lo > 0.0)) return {kScaleFloor, 0, true};
  const double scale = std::max((hi - lo) / maxq, kScaleFloor);
  const double zero = std::clamp(std::round(-lo / scale), 0.0, maxq);
  return {scale, static_cast<std::int32_t>(zero), false};
}

double fake_quant(double w, const Grid& g, double qlo, double qhi) {
  const double q = std::clamp(std::round(w / g.scale + g.zero), qlo, qhi);
  return (q - g.zero) * g.scale;
}

void code_range(int bits, bool symmetric, double& qlo, double& qhi) {
  if (symmetric) {
    qlo = -static_cast<double>(1 << (bits - 1));
    qhi = static_cast<double>((1 << (bits - 1)) - 1);
  } else {
    qlo = 0.0;
    qhi = static_cast<double>((1 << bits) - 1);
  }
}

using GroupFit = Grid (*)(std::span<const double>, int, bool, double&);

Grid fit_group_minmax(std::span<const double> v, int bits, bool symmetric, double& shrink) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  shrink = 1.0;
  return grid_from_range(*lo, *hi, bits, symmetric);
}

Grid fit_group_mse(std::span<const double> v, int bits, bool symmetric, double& shrink) {
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  double qlo = 0.0;
  double qhi = 0.0;
  code_range(bits, symmetric, qlo, qhi);
  Grid best{};
  double best_err = 0.0;
  bool have = false;
  for (double s : shrink_grid()) {
    const Grid g = grid_from_range(s * *lo_it, s * *hi_it, bits, symmetric);
    double err = 0.0;
    for (double x : v) {
      const double d = fake_quant(x, g, qlo, qhi) - x;
      err += d * d;
    }
    if (!have || err < best_err) {
      best = g;
      best_err = err;
      shrink = s;
      have = true;
    }
  }
  return best;
}

QuantParams fit_with(const Matrix& w, int bits, bool symmetric, std::size_t group_size,
                     GroupFit fit) {
  validate_bits(bits);
  if (group_size != 0 && (w.cols() == 0 || w.cols() % group_size != 0)) {
    throw ValidationError("group_size " + std::to_string(group_size) +
                          " does not divide channel length " + std::to_string(w.cols()));
  }
  QuantParams p;
  p.bits = bits;
  p.symmetric = symmetric;
  p.group_size = group_size;
  p.rows = w.rows();
  p.cols = w.cols();
  const std::size_t groups = p.groups_per_row();
  const std::size_t glen = group_size == 0 ? w.cols() : group_size;
  p.scale.assign(p.rows * groups, 1.0);
  p.shrink.assign(p.rows * groups, 1.0);
  if (!symmetric) p.zero_point.assign(p.rows * groups, 0);
  if (p.passthrough() || w.cols() == 0) return p;

  for (std::size_t r = 0; r < p.rows; ++r) {
    const auto row = w.row(r);
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t idx = r * groups + g;
      const Grid grid = fit(row.subspan(g * glen, glen), bits, symmetric, p.shrink[idx]);
      p.scale[idx] = grid.scale;
      if (!symmetric) p.zero_point[idx] = grid.zero;
      p.scale_floored = p.scale_floored || grid.floored;
    }
  }
  return p;
}

}  // namespace

std::size_t QuantParams::groups_per_row() const noexcept {
  if (group_size == 0 || cols == 0) return 1;
  return cols / group_size;
}

std::size_t QuantParams::group_of(std::size_t col) const noexcept {
  return group_size == 0 ? 0 : col / group_size;
}

std::int32_t QuantParams::qmin() const noexcept {
  return symmetric ? -(1 << (bits - 1)) : 0;
}

std::int32_t QuantParams::qmax() const noexcept {
  return symmetric ? (1 << (bits - 1)) - 1 : (1 << bits) - 1;
}

double QuantParams::quantize(double w, std::size_t row, std::size_t col,
                             double* code) const noexcept {
  if (passthrough()) {
    if (code) *code = w;
    return w;
  }
  const double s = scale_at(row, col);
  const double z = zero_at(row, col);
  const double q = std::clamp(std::round(w / s + z), static_cast<double>(qmin()),
                              static_cast<double>(qmax()));
  if (code) *code = q;
  return (q - z) * s;
}

void validate_bits(int bits) {
  if (bits != 2 && bits != 3 && bits != 4 && bits != 8 && bits != kPassthroughBits) {
    throw ValidationError("bits must be one of 2, 3, 4, 8, 16; got " + std::to_string(bits));
  }
}

std::vector<double> shrink_grid() {
  std::vector<double> s;
  s.reserve(81);
  for (int i = 0; i <= 80; ++i) s.push_back(static_cast<double>(100 - i) / 100.0);
  return s;
}

QuantParams fit_params_minmax(const Matrix& w, int bits, bool symmetric,
                              std::size_t group_size) {
  return fit_with(w, bits, symmetric, group_size, &fit_group_minmax);
}

QuantParams fit_params_mse(const Matrix& w, int bits, bool symmetric, std::size_t group_size) {
  return fit_with(w, bits, symmetric, group_size, &fit_group_mse);
}

QuantParams fit_params(const Matrix& w, int bits, bool symmetric, std::size_t group_size,
                       ClipSearch clip) {
  return clip == ClipSearch::Mse ? fit_params_mse(w, bits, symmetric, group_size)
                                 : fit_params_minmax(w, bits, symmetric, group_size);
}

RtnResult quantize_rtn(const Matrix& w, const QuantParams& p) {
  if (w.rows() != p.rows || w.cols() != p.cols) {
    throw ShapeError("quantize_rtn: params fitted for " + std::to_string(p.rows) + "x" +
                     std::to_string(p.cols) + ", got " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()));
  }
  RtnResult out{Matrix(w.rows(), w.cols()), Matrix(w.rows(), w.cols())};
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      double code = 0.0;
      out.w_hat(r, c) = p.quantize(w(r, c), r, c, &code);
      out.q_int(r, c) = code;
    }
  }
  return out;
}

Matrix quantize_activations(const Matrix& x, const ActQuantConfig& cfg) {
  if (!cfg.enabled || cfg.bits >= kPassthroughBits) return x;
  validate_bits(cfg.bits);
  if (!(cfg.clip_ratio > 0.0 && cfg.clip_ratio <= 1.0)) {
    throw ValidationError("act clip_ratio must lie in (0, 1]");
  }
  double qlo = 0.0;
  double qhi = 0.0;
  code_range(cfg.bits, false, qlo, qhi);
  Matrix out = x.as(DType::F64);
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      lo = std::min(lo, x(r, c));
      hi = std::max(hi, x(r, c));
    }
    const Grid g = grid_from_range(cfg.clip_ratio * lo, cfg.clip_ratio * hi, cfg.bits, false);
    for (std::size_t r = 0; r < x.rows(); ++r) out(r, c) = fake_quant(x(r, c), g, qlo, qhi);
  }
  return out;
}

}  // namespace asymcal
