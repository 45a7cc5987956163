// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace asymcal {

enum class ErrorKind {
  Shape,
  Format,
  Degenerate,
  Factorization,
  Elimination,
  Index,
  Calibration,
  Capability,
  Validation,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for everything the library throws on bad input or
/// numerical failure. `kind()` is stable and used for the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& m) : Error(ErrorKind::Shape, m) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& m) : Error(ErrorKind::Format, m) {}
};

class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& m)
      : Error(ErrorKind::Degenerate, m) {}
};

class FactorizationError : public Error {
 public:
  FactorizationError(std::size_t pivot, const std::string& m)
      : Error(ErrorKind::Factorization, m), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class EliminationError : public Error {
 public:
  explicit EliminationError(const std::string& m)
      : Error(ErrorKind::Elimination, m) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& m) : Error(ErrorKind::Index, m) {}
};

class CalibrationError : public Error {
 public:
  CalibrationError(std::size_t column, const std::string& m)
      : Error(ErrorKind::Calibration, m), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& m)
      : Error(ErrorKind::Capability, m) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m)
      : Error(ErrorKind::Validation, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorKind::Io, m) {}
};

}  // namespace asymcal
