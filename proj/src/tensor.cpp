// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "asymcal/error.hpp"
#include "eigen_view.hpp"

namespace asymcal {

std::string_view to_string(DType dtype) noexcept {
  return dtype == DType::F32 ? "f32" : "f64";
}

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Format: return "format";
    case ErrorKind::Degenerate: return "degenerate_input";
    case ErrorKind::Factorization: return "factorization";
    case ErrorKind::Elimination: return "elimination";
    case ErrorKind::Index: return "index";
    case ErrorKind::Calibration: return "calibration";
    case ErrorKind::Capability: return "capability";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

namespace {

void round_to_float(std::span<double> values) noexcept {
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

DType result_dtype(const Matrix& a, const Matrix& b, const char* op) {
  if (a.dtype() != b.dtype()) {
    throw ShapeError(std::string(op) + ": dtype mismatch");
  }
  return a.dtype();
}

Matrix finish(Matrix m) {
  if (m.dtype() == DType::F32) round_to_float(m.data());
  return m;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, DType dtype)
    : rows_(rows), cols_(cols), dtype_(dtype), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
               DType dtype)
    : rows_(rows), cols_(cols), dtype_(dtype), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  if (dtype_ == DType::F32) round_to_float(data_);
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::set_column(std::size_t c, std::span<const double> values) {
  if (values.size() != rows_) throw ShapeError("set_column: length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_, dtype_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr,
                     std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) {
    throw IndexError("block out of range");
  }
  Matrix out(nr, nc, dtype_);
  for (std::size_t r = 0; r < nr; ++r)
    std::copy_n(data_.data() + (r0 + r) * cols_ + c0, nc, out.row(r).data());
  return out;
}

Matrix Matrix::as(DType dtype) const {
  return Matrix(rows_, cols_, data_, dtype);
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

bool operator==(const Matrix& a, const Matrix& b) noexcept {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.dtype_ == b.dtype_ &&
         a.data_ == b.data_;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  const DType dt = result_dtype(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a) + " x " +
                     shape_str(b));
  }
  Matrix out(a.rows(), b.cols(), dt);
  if (a.cols() == 0 || out.empty()) return out;
  detail::view(out).noalias() = detail::view(a) * detail::view(b);
  return finish(std::move(out));
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  const DType dt = result_dtype(a, b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: column counts differ " + shape_str(a) + " vs " +
                     shape_str(b));
  }
  Matrix out(a.rows(), b.rows(), dt);
  if (a.cols() == 0 || out.empty()) return out;
  detail::view(out).noalias() = detail::view(a) * detail::view(b).transpose();
  return finish(std::move(out));
}

Matrix gram(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix out(n, n, a.dtype());
  if (n == 0 || a.cols() == 0) return out;
  auto g = detail::view(out);
  g.selfadjointView<Eigen::Lower>().rankUpdate(detail::view(a));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out(i, j) = out(j, i);
  return finish(std::move(out));
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out(a.rows(), a.cols(), result_dtype(a, b, "add"));
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = a.data()[i] + b.data()[i];
  return finish(std::move(out));
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix out(a.rows(), a.cols(), result_dtype(a, b, "sub"));
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = a.data()[i] - b.data()[i];
  return finish(std::move(out));
}

Matrix scaled(const Matrix& a, double s) {
  Matrix out = a;
  for (double& v : out.data()) v *= s;
  return finish(std::move(out));
}

double frobenius_sq(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v * v;
  return acc;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::fabs(v));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

Matrix permute_columns(const Matrix& a, std::span<const std::size_t> perm) {
  if (perm.size() != a.cols()) throw ShapeError("permute_columns: size mismatch");
  Matrix out(a.rows(), a.cols(), a.dtype());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t p = 0; p < perm.size(); ++p) out(r, p) = a(r, perm[p]);
  return out;
}

Matrix permute_rows(const Matrix& a, std::span<const std::size_t> perm) {
  if (perm.size() != a.rows()) throw ShapeError("permute_rows: size mismatch");
  Matrix out(a.rows(), a.cols(), a.dtype());
  for (std::size_t p = 0; p < perm.size(); ++p)
    std::copy(a.row(perm[p]).begin(), a.row(perm[p]).end(), out.row(p).begin());
  return out;
}

Matrix unpermute_columns(const Matrix& a, std::span<const std::size_t> perm) {
  if (perm.size() != a.cols()) throw ShapeError("unpermute_columns: size mismatch");
  Matrix out(a.rows(), a.cols(), a.dtype());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t p = 0; p < perm.size(); ++p) out(r, perm[p]) = a(r, p);
  return out;
}

std::vector<std::size_t> invert_permutation(std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t p = 0; p < perm.size(); ++p) inv[perm[p]] = p;
  return inv;
}

std::uint64_t content_hash(const Matrix& m) noexcept {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(m.rows());
  mix(m.cols());
  mix(static_cast<std::uint64_t>(m.dtype()));
  for (double v : m.data()) mix(std::bit_cast<std::uint64_t>(v));
  return h;
}

}  // namespace asymcal
