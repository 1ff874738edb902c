//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "safeflow/metrics.hpp"
#include "safeflow/molgraph.hpp"

namespace safeflow {

// Generated candidates ordered by frequency (descending), ties broken
// lexicographically by canonical string. Unparseable samples are excluded
// from the entries but tracked in `invalid`.
struct RankedCandidates {
  std::vector<std::pair<std::string, int>> entries;
  int total_samples = 0;
  int invalid = 0;

  int valid() const { return total_samples - invalid; }
};

RankedCandidates rank_by_frequency(const std::vector<std::string> &samples);

struct TopkOptions {
  std::vector<int> k_values = {1, 10};
  int fp_radius = 2;
  int fp_nbits = 2048;
  long long mces_budget = 10'000'000;
};

// One evaluated record. Metrics are parallel to k_values; empty candidate
// lists yield hit = 0 and null sentinels for tanimoto/mces.
struct MetricRow {
  std::string spectrum_id;
  std::string truth_canonical;
  int n_valid = 0;
  int n_invalid = 0;
  std::vector<int> k_values;
  std::vector<int> hit;
  std::vector<std::optional<double>> max_tanimoto;
  std::vector<std::optional<int>> min_mces;
  bool mces_exact = true;
  int n_atoms = 0;
  int n_rotatable = 0;
};

MetricRow topk_report(const RankedCandidates &ranked, const MolGraph &truth,
                      const TopkOptions &opts);

enum class Grouping { PerSpectrum, PerUniqueMolecule };

struct Summary {
  int n_rows = 0;
  std::vector<int> k_values;
  std::vector<double> hit;                          // mean per k
  std::vector<std::optional<double>> mean_tanimoto; // over rows with candidates
  std::vector<std::optional<double>> mean_mces;
  double validity = 0.0;
};

// Per-spectrum: plain means over rows. Per-unique-molecule: rows grouped by
// truth_canonical, then the group means are averaged.
Summary aggregate(const std::vector<MetricRow> &rows, Grouping grouping);

enum class StratProperty { NAtoms, NRotatable };

struct StratBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
  std::optional<Summary> summary;  // absent for empty bins
};

// Half-open bins [edges[i], edges[i+1]); rows outside every bin are
// dropped. atom_filter restricts rows by heavy-atom count first.
std::vector<StratBin> stratify(const std::vector<MetricRow> &rows,
                               StratProperty property,
                               const std::vector<double> &edges,
                               std::optional<std::pair<int, int>> atom_filter = std::nullopt);

// Report CSV with the fixed column set (hit<k>/tanimoto<k>/mces<k> per k).
std::string report_csv(const std::vector<MetricRow> &rows,
                       const std::vector<int> &k_values);

// Summary as deterministic key=value lines.
std::string summary_text(const Summary &per_spectrum, const Summary &per_unique);

}  // namespace safeflow
