// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "asymcal/linalg.hpp"
#include "asymcal/quantizer.hpp"
#include "asymcal/tensor.hpp"

namespace asymcal {

enum class CalibMode {
  Rtn,              // no weight updates
  Gptq,             // first term E·Lᵀ only
  GptaqSecondOnly,  // W·P only
  Gptaq,            // both terms
};

enum class AqOrder { WThenA, AThenW };

std::string_view to_string(CalibMode mode) noexcept;
std::string_view to_string(AqOrder order) noexcept;
std::string_view to_string(ClipSearch clip) noexcept;
CalibMode parse_mode(std::string_view s);
AqOrder parse_aq_order(std::string_view s);
ClipSearch parse_clip(std::string_view s);

struct QuantConfig {
  int bits = 4;
  bool symmetric = false;
  std::size_t group_size = 0;
  std::size_t block_size = 128;
  double damp_ratio = 0.01;
  bool act_order = false;
  CalibMode mode = CalibMode::Gptaq;
  ClipSearch clip_search = ClipSearch::MinMax;
  AqOrder aq_order = AqOrder::AThenW;
  ActQuantConfig act_cfg;

  /// Throws ValidationError on the first bad field.
  void validate() const;
};

struct LayerResult {
  /// Dequantized weights in the original column order.
  Matrix q;
  /// Grid in processing order: column p of the grid belongs to original
  /// column perm[p].
  QuantParams params;
  std::vector<std::size_t> perm;
  std::vector<std::size_t> dead_channels;
  double sym_loss = 0.0;
  double asym_loss = 0.0;
  std::chrono::nanoseconds elapsed{0};
};

/// Optional per-iteration record, in processing order.
struct LayerTrace {
  /// Column p is the working value of the p-th processed column at the
  /// start of its own iteration.
  Matrix w_start;
  /// Hash of each output column when it was written.
  std::vector<std::uint64_t> q_hash_at_write;
  /// The P matrix used (processing order); empty unless a GPTAQ mode ran.
  Matrix p;
  CholFactor l;
};

/// Per-layer calibration. W is m×n, X and X̃ are n×k. In RTN and GPTQ
/// modes X̃ is only used for the asymmetric loss.
LayerResult calibrate_layer(const Matrix& w, const Matrix& x, const Matrix& x_tilde,
                            const QuantConfig& cfg, LayerTrace* trace = nullptr);

/// ‖ŴX − WX̃‖²_F.
double asym_loss(const Matrix& w_hat, const Matrix& w, const Matrix& x,
                 const Matrix& x_tilde);

/// Stable descending order of diag(H).
std::vector<std::size_t> act_order_perm(const HessianState& h);

/// Hash of one column, used to check that output columns are write-once.
std::uint64_t column_hash(const Matrix& m, std::size_t col) noexcept;

}  // namespace asymcal
