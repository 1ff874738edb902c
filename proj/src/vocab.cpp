//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace safeflow {

int Vocabulary::find(std::string_view token) const {
  for (int k = 0; k < static_cast<int>(tokens.size()); ++k) {
    if (tokens[static_cast<std::size_t>(k)] == token) {
      return k;
    }
  }
  return -1;
}

std::vector<std::string> lex_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '[') {
      const std::size_t close = text.find(']', i);
      if (close == std::string_view::npos) {
        throw ParseError("unterminated bracket token", i);
      }
      out.emplace_back(text.substr(i, close - i + 1));
      i = close + 1;
      continue;
    }
    if (c == '%') {
      if (i + 2 >= text.size() ||
          !std::isdigit(static_cast<unsigned char>(text[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text[i + 2]))) {
        throw ParseError("'%' must be followed by two digits", i);
      }
      out.emplace_back(text.substr(i, 3));
      i += 3;
      continue;
    }
    if ((c == 'C' || c == 'B') && i + 1 < text.size() &&
        (text[i + 1] == 'l' || text[i + 1] == 'r')) {
      const std::string_view two = text.substr(i, 2);
      if (two == "Cl" || two == "Br") {
        out.emplace_back(two);
        i += 2;
        continue;
      }
    }
    out.emplace_back(text.substr(i, 1));
    ++i;
  }
  return out;
}

Vocabulary build_vocab(const std::vector<std::string> &corpus, int max_len,
                       VocabBuildReport *report) {
  if (corpus.empty()) {
    throw DataError("cannot build a vocabulary from an empty corpus");
  }
  if (max_len < 1) {
    throw DataError("max_len must be positive");
  }
  std::set<std::string> distinct;
  VocabBuildReport rep;
  for (const auto &s : corpus) {
    const auto toks = lex_tokens(s);
    ++rep.total;
    if (static_cast<int>(toks.size()) <= max_len) {
      ++rep.fitting;
    }
    distinct.insert(toks.begin(), toks.end());
  }
  Vocabulary v;
  v.tokens.push_back(kPadToken);
  v.tokens.insert(v.tokens.end(), distinct.begin(), distinct.end());
  v.pad_token = 0;
  v.max_len = max_len;
  if (report != nullptr) {
    *report = rep;
  }
  return v;
}

TokenSeq tokenize(std::string_view text, const Vocabulary &v) {
  std::size_t max_token_len = 1;
  for (const auto &t : v.tokens) {
    max_token_len = std::max(max_token_len, t.size());
  }
  TokenSeq seq;
  std::size_t i = 0;
  while (i < text.size()) {
    int match = -1;
    std::size_t match_len = 0;
    const std::size_t limit = std::min(max_token_len, text.size() - i);
    for (std::size_t len = limit; len >= 1; --len) {
      const int id = v.find(text.substr(i, len));
      if (id >= 0) {
        match = id;
        match_len = len;
        break;
      }
    }
    if (match < 0) {
      throw ParseError("unknown token", i);
    }
    seq.ids.push_back(match);
    i += match_len;
  }
  if (static_cast<int>(seq.ids.size()) > v.max_len) {
    throw DataError("sequence has " + std::to_string(seq.ids.size()) +
                    " tokens, exceeding max_len " + std::to_string(v.max_len));
  }
  seq.ids.resize(static_cast<std::size_t>(v.max_len), v.pad_token);
  return seq;
}

std::string detokenize(const TokenSeq &x, const Vocabulary &v) {
  std::string out;
  for (int id : x.ids) {
    if (id < 0 || id >= v.size()) {
      throw DataError("token id out of range: " + std::to_string(id));
    }
    if (id == v.pad_token) {
      continue;
    }
    out += v.tokens[static_cast<std::size_t>(id)];
  }
  return out;
}

std::string vocab_to_text(const Vocabulary &v) {
  std::string out = "L=" + std::to_string(v.max_len) + "\n";
  for (const auto &t : v.tokens) {
    out += t;
    out += "\n";
  }
  return out;
}

Vocabulary vocab_from_text(std::string_view text) {
  Vocabulary v;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("L=", 0) != 0) {
    throw DataError("vocabulary file must start with L=<int>");
  }
  try {
    v.max_len = std::stoi(line.substr(2));
  } catch (const std::exception &) {
    throw DataError("bad max_len in vocabulary file: " + line);
  }
  if (v.max_len < 1) {
    throw DataError("vocabulary max_len must be positive");
  }
  while (std::getline(in, line)) {
    v.tokens.push_back(line);
  }
  if (v.tokens.empty() || v.tokens.front() != kPadToken) {
    throw DataError("vocabulary file must list the pad token first");
  }
  std::set<std::string> dedup(v.tokens.begin(), v.tokens.end());
  if (dedup.size() != v.tokens.size()) {
    throw DataError("vocabulary file contains duplicate tokens");
  }
  v.pad_token = 0;
  return v;
}

void save_vocab(const Vocabulary &v, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open vocabulary file for writing: " + path);
  }
  out << vocab_to_text(v);
}

Vocabulary load_vocab(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open vocabulary file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return vocab_from_text(buf.str());
}

}  // namespace safeflow
