//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/config.hpp"

#include <fstream>

namespace safeflow {

RunConfig RunConfig::from_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    const std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not key=value: " + line);
    }
    std::string key = line.substr(first, eq - first);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) {
      key.pop_back();
    }
    std::string value = line.substr(eq + 1);
    const std::size_t vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

void RunConfig::set(const std::string &key, const std::string &value) {
  values_[key] = value;
}

bool RunConfig::has(const std::string &key) const { return values_.count(key) > 0; }

std::string RunConfig::str(const std::string &key, const std::string &fallback) const {
  const auto it = values_.find(key);
  const std::string v = it == values_.end() ? fallback : it->second;
  resolved_[key] = v;
  return v;
}

int RunConfig::integer(const std::string &key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    resolved_[key] = std::to_string(fallback);
    return fallback;
  }
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) {
      throw std::invalid_argument(it->second);
    }
    resolved_[key] = it->second;
    return v;
  } catch (const std::exception &) {
    throw ConfigError("config key '" + key + "' is not an integer: " + it->second);
  }
}

double RunConfig::real(const std::string &key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", fallback);
    resolved_[key] = buf;
    return fallback;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) {
      throw std::invalid_argument(it->second);
    }
    resolved_[key] = it->second;
    return v;
  } catch (const std::exception &) {
    throw ConfigError("config key '" + key + "' is not a number: " + it->second);
  }
}

std::uint64_t RunConfig::require_seed(const std::string &key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError("a seed is required (config key '" + key +
                      "' or --seed); there is no silent default");
  }
  try {
    const std::uint64_t v = std::stoull(it->second);
    resolved_[key] = it->second;
    return v;
  } catch (const std::exception &) {
    throw ConfigError("config key '" + key + "' is not a valid seed: " + it->second);
  }
}

std::string RunConfig::effective_text() const {
  std::string out;
  for (const auto &[k, v] : resolved_) {
    out += k + "=" + v + "\n";
  }
  return out;
}

}  // namespace safeflow
