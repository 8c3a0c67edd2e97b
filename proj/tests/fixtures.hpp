// SPDX-License-Identifier: Apache-2.0
#pragma once

// Committed recorded-run fixtures. Set LITTLEBIT_REGEN_FIXTURES=1 to rewrite
// them from the current build instead of comparing.

#include <cstdlib>
#include <filesystem>
#include <string>

#include <doctest.h>

#include "littlebit/file_util.hpp"

namespace fixtures {

inline std::filesystem::path dir() { return std::filesystem::path(LITTLEBIT_FIXTURE_DIR); }

inline bool regenerating() {
  const char* v = std::getenv("LITTLEBIT_REGEN_FIXTURES");
  return v != nullptr && std::string(v) == "1";
}

inline std::string read(const std::string& name) {
  const littlebit::Bytes b = littlebit::read_file(dir() / name);
  return std::string(b.begin(), b.end());
}

/// Byte-for-byte comparison against the committed file.
inline void check(const std::string& name, const std::string& content) {
  if (regenerating()) {
    littlebit::write_file_atomic(dir() / name, content);
    MESSAGE("rewrote fixture " << name);
    return;
  }
  REQUIRE_MESSAGE(std::filesystem::exists(dir() / name), "missing fixture " << name);
  CHECK_MESSAGE(read(name) == content, "fixture " << name << " differs from this run");
}

}  // namespace fixtures
