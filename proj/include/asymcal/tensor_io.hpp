// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "asymcal/tensor.hpp"

namespace asymcal {

// Container layout, little-endian, no padding:
//   "GTAQ" | u8 version (1) | u8 dtype (0=F32, 1=F64) | u32 rank (2)
//   | u64 rows | u64 cols | row-major payload
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 4 + 1 + 1 + 4 + 8 + 8;

std::vector<std::uint8_t> encode_tensor(const Matrix& m);
Matrix decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Matrix& m);
Matrix read_tensor(const std::filesystem::path& path);

}  // namespace asymcal
