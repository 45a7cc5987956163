// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

// Internal: zero-copy Eigen views over Matrix storage. Kept out of the public
// headers so callers never depend on Eigen.

#pragma once

#include <Eigen/Core>

#include "asymcal/tensor.hpp"

namespace asymcal::detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using View = Eigen::Map<RowMajor>;
using ConstView = Eigen::Map<const RowMajor>;
using Strided = Eigen::Map<RowMajor, 0, Eigen::OuterStride<>>;
using ConstStrided = Eigen::Map<const RowMajor, 0, Eigen::OuterStride<>>;

inline View view(Matrix& m) {
  return View(m.data().data(), static_cast<Eigen::Index>(m.rows()),
              static_cast<Eigen::Index>(m.cols()));
}

inline ConstView view(const Matrix& m) {
  return ConstView(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                   static_cast<Eigen::Index>(m.cols()));
}

/// Sub-block [r0, r0+nr) × [c0, c0+nc) of a row-major matrix.
inline Strided sub(Matrix& m, std::size_t r0, std::size_t c0, std::size_t nr,
                   std::size_t nc) {
  return Strided(m.data().data() + r0 * m.cols() + c0,
                 static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nc),
                 Eigen::OuterStride<>(static_cast<Eigen::Index>(m.cols())));
}

inline ConstStrided sub(const Matrix& m, std::size_t r0, std::size_t c0,
                        std::size_t nr, std::size_t nc) {
  return ConstStrided(m.data().data() + r0 * m.cols() + c0,
                      static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nc),
                      Eigen::OuterStride<>(static_cast<Eigen::Index>(m.cols())));
}

}  // namespace asymcal::detail
