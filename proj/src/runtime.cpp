// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/runtime.hpp"

#include <cstdlib>
#include <string>
#include <thread>

#ifndef ASYMCAL_GIT_HASH
#define ASYMCAL_GIT_HASH "unknown"
#endif

namespace asymcal {

std::string_view version() noexcept { return "0.3.0"; }

std::string_view git_hash() noexcept { return ASYMCAL_GIT_HASH; }

unsigned thread_budget() noexcept {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("ASYMCAL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && static_cast<unsigned long>(v) < hw) {
      return static_cast<unsigned>(v);
    }
  }
  return hw;
}

}  // namespace asymcal
