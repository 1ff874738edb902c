//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "safeflow/config.hpp"

using namespace safeflow;

namespace {

std::string write_temp_config(const std::string &content) {
  const auto dir = std::filesystem::temp_directory_path() / "safeflow_cfg_test";
  std::filesystem::create_directories(dir);
  static int counter = 0;
  const std::string path = (dir / ("cfg" + std::to_string(counter++) + ".txt")).string();
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("config files parse key=value with comments") {
  const std::string path = write_temp_config(
      "# comment\n"
      "lr = 0.001\n"
      "batch=8\n"
      "\n"
      "cond_source=sim\n");
  const RunConfig cfg = RunConfig::from_file(path);
  CHECK(cfg.real("lr", 0.0) == doctest::Approx(0.001));
  CHECK(cfg.integer("batch", 0) == 8);
  CHECK(cfg.str("cond_source", "") == "sim");
  CHECK(cfg.integer("missing", 42) == 42);
}

TEST_CASE("malformed configs are rejected") {
  CHECK_THROWS_AS(RunConfig::from_file("/nonexistent/path/cfg"), ConfigError);
  const std::string bad = write_temp_config("just some words\n");
  CHECK_THROWS_AS(RunConfig::from_file(bad), ConfigError);
  const std::string badnum = write_temp_config("batch=eight\n");
  const RunConfig cfg = RunConfig::from_file(badnum);
  CHECK_THROWS_AS(cfg.integer("batch", 1), ConfigError);
}

TEST_CASE("seed is required with no silent default") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.require_seed(), ConfigError);
  cfg.set("seed", "12345");
  CHECK(cfg.require_seed() == 12345ULL);
  cfg.set("seed", "not-a-seed");
  CHECK_THROWS_AS(cfg.require_seed(), ConfigError);
}

TEST_CASE("overrides win and the effective text is sorted and stable") {
  const std::string path = write_temp_config("lr=0.001\nbatch=8\n");
  RunConfig cfg = RunConfig::from_file(path);
  cfg.set("lr", "0.01");
  CHECK(cfg.real("lr", 0.0) == doctest::Approx(0.01));
  (void)cfg.integer("batch", 0);
  (void)cfg.str("cond_source", "sim");
  const std::string text = cfg.effective_text();
  CHECK(text == "batch=8\ncond_source=sim\nlr=0.01\n");
}
