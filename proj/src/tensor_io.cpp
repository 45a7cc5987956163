// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "asymcal/error.hpp"

namespace asymcal {

namespace {

constexpr char kMagic[4] = {'G', 'T', 'A', 'Q'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<U>(bytes[offset + i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Matrix& m) {
  const std::size_t elem = m.dtype() == DType::F32 ? 4 : 8;
  std::vector<std::uint8_t> out;
  out.reserve(kTensorHeaderBytes + elem * m.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kTensorVersion);
  out.push_back(static_cast<std::uint8_t>(m.dtype()));
  put_le<std::uint32_t>(out, 2);
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint64_t>(out, m.cols());
  if (m.dtype() == DType::F32) {
    for (double v : m.data()) put_le<float>(out, static_cast<float>(v));
  } else {
    for (double v : m.data()) put_le<double>(out, v);
  }
  return out;
}

Matrix decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kTensorHeaderBytes) throw FormatError("tensor: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("tensor: bad magic");
  if (bytes[4] != kTensorVersion) {
    throw FormatError("tensor: unsupported version " + std::to_string(bytes[4]));
  }
  const std::uint8_t code = bytes[5];
  if (code > 1) throw FormatError("tensor: unknown dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const auto rank = get_le<std::uint32_t>(bytes, 6);
  if (rank != 2) throw FormatError("tensor: rank must be 2, got " + std::to_string(rank));
  const auto rows = get_le<std::uint64_t>(bytes, 10);
  const auto cols = get_le<std::uint64_t>(bytes, 18);
  const std::size_t elem = dtype == DType::F32 ? 4 : 8;
  const std::size_t capacity = bytes.size() / elem;
  if (rows != 0 && cols != 0 && (cols > capacity || rows > capacity / cols)) {
    throw FormatError("tensor: truncated payload");
  }
  const std::size_t count = rows * cols;
  const std::size_t expected = kTensorHeaderBytes + count * elem;
  if (bytes.size() < expected) throw FormatError("tensor: truncated payload");
  if (bytes.size() > expected) throw FormatError("tensor: trailing bytes after payload");

  std::vector<double> data(count);
  std::size_t off = kTensorHeaderBytes;
  for (std::size_t i = 0; i < count; ++i, off += elem) {
    data[i] = dtype == DType::F32 ? static_cast<double>(get_le<float>(bytes, off))
                                  : get_le<double>(bytes, off);
  }
  Matrix m(rows, cols, std::move(data), dtype);
  if (!m.all_finite()) throw FormatError("tensor: non-finite value in payload");
  return m;
}

void write_tensor(const std::filesystem::path& path, const Matrix& m) {
  const auto bytes = encode_tensor(m);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

Matrix read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

}  // namespace asymcal
