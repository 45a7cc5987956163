// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "asymcal/tensor.hpp"

namespace asymcal {

struct Seed {
  std::uint64_t value = 0;
};

/// SplitMix64 stream with Marsaglia-polar normals.
///
/// Only integer arithmetic, IEEE division, sqrt and log are involved, so a
/// fixed seed yields the same sequence on any conforming platform.
class SplitMix64 {
 public:
  explicit SplitMix64(Seed seed) noexcept : state_(seed.value) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() noexcept;
  double normal() noexcept;

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derives an independent child seed from a parent and a stream tag.
Seed derive_seed(Seed parent, std::uint64_t tag) noexcept;

/// rows × cols standard normal, filled row-major from one stream.
Matrix gen_normal(Seed seed, std::size_t rows, std::size_t cols);

/// X = A·Z with Z = gen_normal(seed, n, k) and A[i][j] = decay^(i−j) for j ≤ i.
/// Evaluated by the recurrence X_i = decay·X_{i−1} + Z_i.
Matrix gen_correlated(Seed seed, std::size_t n, std::size_t k, double decay);

}  // namespace asymcal
