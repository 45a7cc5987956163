// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

// Shared helpers for the test binaries. Everything here is written with
// plain loops so it never shares code paths with the library under test.

#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>

#include "asymcal/random.hpp"
#include "asymcal/tensor.hpp"

namespace testsupport {

using asymcal::Matrix;

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < a.cols(); ++t) s += a(i, t) * b(t, j);
      c(i, j) = s;
    }
  return c;
}

inline Matrix naive_transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double max_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

inline double max_abs_entry(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

/// G·Gᵀ + n·I for a seeded normal G; well conditioned.
inline Matrix random_spd(asymcal::Seed seed, std::size_t n) {
  const Matrix g = asymcal::gen_normal(seed, n, n);
  Matrix h = naive_matmul(g, naive_transpose(g));
  for (std::size_t i = 0; i < n; ++i) h(i, i) += static_cast<double>(n);
  return h;
}

/// Per-test scratch directory under the system temp dir, emptied on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("asymcal_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testsupport
