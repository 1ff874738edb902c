//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace safeflow {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string &out, std::uint32_t v) {
  out.append(reinterpret_cast<const char *>(&v), sizeof v);
}

void put_u64(std::string &out, std::uint64_t v) {
  out.append(reinterpret_cast<const char *>(&v), sizeof v);
}

struct Reader {
  const std::string &bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) {
      throw DataError("truncated checkpoint file");
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string chunk(std::size_t n) {
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string config_to_text(const std::map<std::string, std::string> &kv) {
  std::string out;
  for (const auto &[k, v] : kv) {
    out += k + "=" + v + "\n";
  }
  return out;
}

std::map<std::string, std::string> config_from_text(const std::string &text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("bad config line in checkpoint: " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

Sha256 sha256_bytes(std::string_view bytes) {
  Sha256 out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size()) {
    throw Error("SHA-256 computation failed");
  }
  return out;
}

Sha256 sha256_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open file for hashing: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_bytes(buf.str());
}

std::string sha256_hex(const Sha256 &hash) {
  static const char *digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : hash) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 15]);
  }
  return out;
}

void save_checkpoint(const Checkpoint &ckpt, const std::string &path) {
  std::string out;
  out.append(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  out.append(reinterpret_cast<const char *>(ckpt.vocab_hash.data()),
             ckpt.vocab_hash.size());
  const std::string cfg = config_to_text(ckpt.config_kv);
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.items.size()));
  for (const auto &[name, tensor] : ckpt.params.items) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
    for (std::size_t dim : tensor.dims) {
      put_u64(out, static_cast<std::uint64_t>(dim));
    }
    out.append(reinterpret_cast<const char *>(tensor.data.data()),
               tensor.data.size() * sizeof(double));
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw DataError("cannot open checkpoint for writing: " + path);
  }
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) {
    throw DataError("failed writing checkpoint: " + path);
  }
}

Checkpoint load_checkpoint(const std::string &path,
                           const std::optional<Sha256> &expected_vocab_hash) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw DataError("cannot open checkpoint: " + path);
  }
  std::ostringstream buf;
  buf << file.rdbuf();
  const std::string bytes = buf.str();
  Reader r{bytes};

  const std::string magic = r.chunk(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw DataError("bad checkpoint magic (not a DFM1 file)");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::string hash = r.chunk(ckpt.vocab_hash.size());
  std::memcpy(ckpt.vocab_hash.data(), hash.data(), ckpt.vocab_hash.size());
  if (expected_vocab_hash && *expected_vocab_hash != ckpt.vocab_hash) {
    throw DataError("vocabulary mismatch: checkpoint was trained with " +
                    sha256_hex(ckpt.vocab_hash) + ", supplied vocabulary is " +
                    sha256_hex(*expected_vocab_hash));
  }
  const std::uint32_t cfg_len = r.u32();
  ckpt.config_kv = config_from_text(r.chunk(cfg_len));

  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.chunk(name_len);
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> dims;
    dims.reserve(rank);
    std::size_t numel = 1;
    for (std::uint32_t j = 0; j < rank; ++j) {
      dims.push_back(static_cast<std::size_t>(r.u64()));
      numel *= dims.back();
    }
    Tensor t(dims);
    const std::string data = r.chunk(numel * sizeof(double));
    std::memcpy(t.data.data(), data.data(), data.size());
    ckpt.params.items.emplace_back(name, std::move(t));
  }
  if (r.pos != bytes.size()) {
    throw DataError("trailing bytes in checkpoint file");
  }
  return ckpt;
}

}  // namespace safeflow
