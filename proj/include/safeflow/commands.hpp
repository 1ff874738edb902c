//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace safeflow {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Config file path plus key=value overrides from flags.
struct CommonArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

struct BuildVocabArgs {
  std::string corpus;
  std::string out;
  int max_len = 96;
  int max_cuts = 8;
};

struct TrainArgs {
  CommonArgs common;
  std::string corpus;
  std::string vocab;
  std::string out_dir;
};

struct SampleArgs {
  CommonArgs common;
  std::string checkpoint;
  std::string vocab;
  std::string conditions;  // .mgf spectra or descriptor file; may be empty
  std::string out_dir;
  bool unconditional = false;
  int workers = 1;
};

struct EvaluateArgs {
  std::string predictions;
  std::string corpus;
  std::string out_dir;
  std::vector<int> k_values = {1, 10};
  long long mces_budget = 10'000'000;
  bool write_json = false;
  std::string stratify_by;             // "", "n_atoms" or "n_rotatable"
  std::vector<double> stratify_edges;
  std::optional<std::pair<int, int>> filter_atoms;
};

struct SimulateArgs {
  std::string corpus;
  std::string out;
};

struct CanonicalizeArgs {
  std::string in;
  std::string out;
};

struct FragmentArgs {
  std::string in;
  std::string out;
  int max_cuts = 8;
};

int run_build_vocab(const BuildVocabArgs &args);
int run_train(const TrainArgs &args);
int run_sample(const SampleArgs &args);
int run_evaluate(const EvaluateArgs &args);
int run_simulate_spectra(const SimulateArgs &args);
int run_canonicalize(const CanonicalizeArgs &args);
int run_fragment(const FragmentArgs &args);

}  // namespace safeflow
