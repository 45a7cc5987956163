// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

#include "asymcal/pipeline.hpp"
#include "asymcal/random.hpp"

namespace asymcal {

enum class ToyKind { Mlp, TinyTransformer };

std::string_view to_string(ToyKind kind) noexcept;
ToyKind parse_toy_kind(std::string_view s);

struct ToySpec {
  ToyKind kind = ToyKind::Mlp;
  std::size_t blocks = 4;       // 2..6
  std::size_t width = 32;       // 16..128
  std::size_t hidden_mult = 2;  // 1..4
  Seed seed{0};
  /// Singular values of every weight are decay^i before normalization.
  double weight_decay = 0.9;
  std::size_t samples = 128;
  std::size_t tokens = 16;
  /// Channel correlation of the calibration activations.
  double calib_decay = 0.5;

  void validate() const;
};

/// W = U·diag(decay^i)·Vᵀ with U, V orthonormal from the seed, scaled so the
/// RMS singular value is 1.
Matrix spectral_weight(Seed seed, std::size_t rows, std::size_t cols, double decay);

ModelGraph build_model(const ToySpec& spec);

/// width × (samples·tokens) correlated activations.
Matrix gen_calib(const ToySpec& spec, std::size_t samples, std::size_t tokens);
Matrix gen_calib(const ToySpec& spec);

}  // namespace asymcal
