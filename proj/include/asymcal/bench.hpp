// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "asymcal/random.hpp"
#include "asymcal/tensor.hpp"

namespace asymcal {

enum class BenchVariant { PReference, PFused, GptqLayer, GptaqLayer };

std::string_view to_string(BenchVariant v) noexcept;
BenchVariant parse_bench_variant(std::string_view s);

struct BenchResult {
  BenchVariant variant = BenchVariant::PFused;
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t reps = 0;
  double median_us = 0.0;
  double iqr_us = 0.0;
  unsigned threads = 1;
  DType dtype = DType::F64;
};

struct BenchOptions {
  std::size_t reps = 9;
  std::size_t warmups = 2;
  /// Calibration columns; 0 picks 2n for P and 2·max(sizes) for layers.
  std::size_t k = 0;
  Seed seed{1234};
};

inline constexpr std::size_t kBenchMinReps = 5;
inline constexpr std::size_t kPReferenceMaxN = 2048;

/// Row-loop vs fused P at each n. Both variants are checked against each
/// other (max abs difference ≤ 1e-8) before timing.
std::vector<BenchResult> bench_p(const std::vector<std::size_t>& sizes,
                                 const BenchOptions& opts = {});

/// GPTQ vs GPTAQ calibration of a square n×n layer at fixed k. Each mode is
/// checked for lazy-batch invariance (B = 128 vs B = n) before timing.
std::vector<BenchResult> bench_layer(const std::vector<std::size_t>& sizes,
                                     const BenchOptions& opts = {});

/// Median and interquartile range (linear interpolation) of samples.
double median_of(std::vector<double> v);
double iqr_of(std::vector<double> v);

/// CSV header: variant,n,k,reps,median_us,iqr_us,threads,dtype. With
/// `overhead` an overhead_ratio column is appended: GPTAQ median over GPTQ
/// median at the same n (1 on GPTQ rows, empty for P variants).
std::string bench_csv(const std::vector<BenchResult>& rows, bool overhead = false);
std::vector<BenchResult> parse_bench_csv(std::string_view text);

}  // namespace asymcal
