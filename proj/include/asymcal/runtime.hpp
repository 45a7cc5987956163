// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace asymcal {

std::string_view version() noexcept;
std::string_view git_hash() noexcept;

/// Worker threads available to internally parallel kernels: the hardware
/// concurrency, optionally lowered by the ASYMCAL_THREADS environment
/// variable. Never less than 1.
unsigned thread_budget() noexcept;

}  // namespace asymcal
