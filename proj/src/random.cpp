// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/random.hpp"

#include <cmath>

#include "asymcal/error.hpp"

namespace asymcal {

std::uint64_t SplitMix64::next_u64() noexcept {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double SplitMix64::uniform01() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SplitMix64::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

Seed derive_seed(Seed parent, std::uint64_t tag) noexcept {
  SplitMix64 g(Seed{parent.value ^ (tag * 0xd1b54a32d192ed03ull)});
  g.next_u64();
  return Seed{g.next_u64()};
}

Matrix gen_normal(Seed seed, std::size_t rows, std::size_t cols) {
  SplitMix64 g(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = g.normal();
  return m;
}

Matrix gen_correlated(Seed seed, std::size_t n, std::size_t k, double decay) {
  if (n < 1 || k < 1) throw ValidationError("gen_correlated: n and k must be >= 1");
  if (!(decay > 0.0 && decay <= 1.0)) {
    throw ValidationError("gen_correlated: decay must lie in (0, 1]");
  }
  Matrix x = gen_normal(seed, n, k);
  for (std::size_t i = 1; i < n; ++i) {
    auto prev = x.row(i - 1);
    auto cur = x.row(i);
    for (std::size_t c = 0; c < k; ++c) cur[c] += decay * prev[c];
  }
  return x;
}

}  // namespace asymcal
