//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace safeflow {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed textual input (SMILES, SAFE, pattern, spectrum, ...).
// `position` is the 0-based byte offset of the offending character.
struct ParseError : Error {
  std::size_t position;

  ParseError(const std::string &msg, std::size_t pos)
      : Error(msg + " (at position " + std::to_string(pos) + ")"),
        position(pos) { }
};

// Bad user configuration (missing keys, out-of-range values).
struct ConfigError : Error {
  using Error::Error;
};

// Well-formed but unusable data (dimension mismatch, unknown id, ...).
struct DataError : Error {
  using Error::Error;
};

// Non-finite values encountered during training or inference.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace safeflow
