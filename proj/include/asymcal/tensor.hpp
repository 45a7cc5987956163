// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace asymcal {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

std::string_view to_string(DType dtype) noexcept;

/// Dense row-major real matrix.
///
/// Storage is always double. A matrix tagged F32 holds only values that are
/// exactly representable as float; they are rounded on construction and on
/// every elementwise result produced by the free functions below. All
/// calibration math runs on F64 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, DType dtype = DType::F64);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
         DType dtype = DType::F64);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  DType dtype() const noexcept { return dtype_; }

  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  Matrix transposed() const;
  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;

  /// Copy converted to `dtype` (F32 rounds every element to float).
  Matrix as(DType dtype) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix& a, const Matrix& b) noexcept;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  DType dtype_ = DType::F64;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// a · bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a · aᵀ, exactly symmetric.
Matrix gram(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double s);

double frobenius_sq(const Matrix& a);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Columns reordered so that result column p is input column perm[p].
Matrix permute_columns(const Matrix& a, std::span<const std::size_t> perm);
/// Rows reordered so that result row p is input row perm[p].
Matrix permute_rows(const Matrix& a, std::span<const std::size_t> perm);
/// Inverse of `permute_columns`: result column perm[p] is input column p.
Matrix unpermute_columns(const Matrix& a, std::span<const std::size_t> perm);

std::vector<std::size_t> invert_permutation(std::span<const std::size_t> perm);

/// FNV-1a over shape, dtype and the raw bytes of every element.
std::uint64_t content_hash(const Matrix& m) noexcept;

}  // namespace asymcal
