//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "safeflow/error.hpp"

namespace safeflow {

// Fixed-length sequence of token ids; positions past the content hold the
// pad token.
struct TokenSeq {
  std::vector<int> ids;
};

struct Vocabulary {
  std::vector<std::string> tokens;  // pad first, then sorted corpus tokens
  int pad_token = 0;
  int max_len = 0;

  int size() const { return static_cast<int>(tokens.size()); }
  int find(std::string_view token) const;  // -1 when absent
};

inline constexpr const char *kPadToken = "<pad>";

// Lexical scan of a SAFE/SMILES string into its atomic tokens: bracket
// atoms, two-letter elements, %nn closures, everything else one char.
std::vector<std::string> lex_tokens(std::string_view text);

struct VocabBuildReport {
  int total = 0;
  int fitting = 0;  // sequences with <= max_len tokens
  double coverage() const { return total == 0 ? 0.0 : static_cast<double>(fitting) / total; }
};

// Deterministic vocabulary over a corpus of SAFE strings: pad token first,
// then every distinct observed token in lexicographic order. Strings
// longer than max_len still contribute tokens but count against coverage.
Vocabulary build_vocab(const std::vector<std::string> &corpus, int max_len,
                       VocabBuildReport *report = nullptr);

// Greedy longest-match tokenization, right-padded to max_len.
TokenSeq tokenize(std::string_view text, const Vocabulary &v);

// Concatenates non-pad tokens; pads anywhere in the sequence are dropped.
// The result may not be a valid molecule - callers adjudicate via parsing.
std::string detokenize(const TokenSeq &x, const Vocabulary &v);

// Vocabulary file: line 1 "L=<int>", then one token per line in index
// order. Byte-identical for identical corpora.
std::string vocab_to_text(const Vocabulary &v);
Vocabulary vocab_from_text(std::string_view text);
void save_vocab(const Vocabulary &v, const std::string &path);
Vocabulary load_vocab(const std::string &path);

}  // namespace safeflow
