// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "asymcal/tensor.hpp"

namespace asymcal {

/// Smallest scale a fit may produce; channels that hit it are flagged.
inline constexpr double kScaleFloor = 1e-12;
/// Bit-width treated as "no quantization": values pass through unchanged.
inline constexpr int kPassthroughBits = 16;

/// Affine grid for an m×n weight matrix, per output channel (row) or per
/// group of `group_size` consecutive input columns within each row.
///
/// Asymmetric: q ∈ [0, 2^b − 1], ŵ = (q − zero)·scale.
/// Symmetric:  q ∈ [−2^(b−1), 2^(b−1) − 1], ŵ = q·scale, no zero point.
struct QuantParams {
  int bits = 4;
  bool symmetric = false;
  std::size_t group_size = 0;  // 0: one group spanning the whole row
  std::size_t rows = 0;
  std::size_t cols = 0;
  /// rows × groups_per_row(), row-major.
  std::vector<double> scale;
  /// Same layout as `scale`; empty when symmetric.
  std::vector<std::int32_t> zero_point;
  /// Shrink factor chosen per group (1.0 for minmax fits).
  std::vector<double> shrink;
  /// True when at least one group hit kScaleFloor (constant-zero data).
  bool scale_floored = false;

  bool passthrough() const noexcept { return bits >= kPassthroughBits; }
  std::size_t groups_per_row() const noexcept;
  std::size_t group_of(std::size_t col) const noexcept;
  std::int32_t qmin() const noexcept;
  std::int32_t qmax() const noexcept;

  double scale_at(std::size_t row, std::size_t col) const noexcept {
    return scale[row * groups_per_row() + group_of(col)];
  }
  std::int32_t zero_at(std::size_t row, std::size_t col) const noexcept {
    return symmetric ? 0 : zero_point[row * groups_per_row() + group_of(col)];
  }

  /// Rounds `w` onto the grid of (row, col); returns the dequantized value
  /// and writes the integer code when `code` is non-null.
  double quantize(double w, std::size_t row, std::size_t col,
                  double* code = nullptr) const noexcept;
};

/// Activation grid: per token, asymmetric, over clip_ratio × [min, max].
struct ActQuantConfig {
  int bits = kPassthroughBits;
  double clip_ratio = 0.9;
  bool enabled = false;
};

enum class ClipSearch { MinMax, Mse };

void validate_bits(int bits);

/// Observed range (extended to include zero when asymmetric) of each
/// channel or group maps onto the integer range.
QuantParams fit_params_minmax(const Matrix& w, int bits, bool symmetric,
                              std::size_t group_size);

/// Evaluates shrink factors 1.00, 0.99, …, 0.20 of the min/max range per
/// channel or group and keeps the one with smallest squared error; a later
/// candidate must be strictly better to replace an earlier one.
QuantParams fit_params_mse(const Matrix& w, int bits, bool symmetric,
                           std::size_t group_size);

QuantParams fit_params(const Matrix& w, int bits, bool symmetric,
                       std::size_t group_size, ClipSearch clip);

/// The 81 candidate shrink factors in evaluation order.
std::vector<double> shrink_grid();

struct RtnResult {
  Matrix q_int;
  Matrix w_hat;
};

/// q = clamp(round(w/scale + zero)), ŵ = (q − zero)·scale, rounding half
/// away from zero. With passthrough params both outputs equal `w`.
RtnResult quantize_rtn(const Matrix& w, const QuantParams& p);

/// Simulated per-token activation quantization of an n×k matrix; each
/// column is one token. Returns `x` unchanged when cfg is disabled or
/// passthrough.
Matrix quantize_activations(const Matrix& x, const ActQuantConfig& cfg);

}  // namespace asymcal
