//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "safeflow/error.hpp"

namespace safeflow {

// Flat key=value configuration. Files provide base values, command-line
// flags override them, and every value a command actually consumes is
// recorded so the effective configuration can be echoed next to the
// outputs it produced.
class RunConfig {
 public:
  RunConfig() = default;
  static RunConfig from_file(const std::string &path);

  void set(const std::string &key, const std::string &value);
  bool has(const std::string &key) const;

  std::string str(const std::string &key, const std::string &fallback) const;
  int integer(const std::string &key, int fallback) const;
  double real(const std::string &key, double fallback) const;
  std::uint64_t require_seed(const std::string &key = "seed") const;

  // Sorted key=value lines of everything consumed so far.
  std::string effective_text() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> resolved_;
};

}  // namespace safeflow
