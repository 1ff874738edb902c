//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "safeflow/model.hpp"

namespace safeflow {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256_bytes(std::string_view bytes);
Sha256 sha256_file(const std::string &path);
std::string sha256_hex(const Sha256 &hash);

struct Checkpoint {
  Parameters params;
  std::map<std::string, std::string> config_kv;  // model config + extras
  Sha256 vocab_hash{};

  DenoiserConfig model_config() const { return DenoiserConfig::from_kv(config_kv); }
};

// Binary layout (little-endian throughout): magic "DFM1"; version u32;
// vocabulary SHA-256 (32 raw bytes); config text as u32 length + UTF-8
// key=value lines; tensor count u32; then per tensor: name (u32 length +
// bytes), rank u32, dims as u64 each, data as IEEE-754 binary64.
void save_checkpoint(const Checkpoint &ckpt, const std::string &path);

// Verifies magic/version and, when given, the vocabulary hash.
Checkpoint load_checkpoint(const std::string &path,
                           const std::optional<Sha256> &expected_vocab_hash = std::nullopt);

}  // namespace safeflow
