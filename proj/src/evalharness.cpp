//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/evalharness.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "safeflow/safe.hpp"

namespace safeflow {

RankedCandidates rank_by_frequency(const std::vector<std::string> &samples) {
  RankedCandidates out;
  out.total_samples = static_cast<int>(samples.size());
  std::map<std::string, int> counts;
  for (const auto &raw : samples) {
    try {
      const MolGraph m = decode_safe(raw);
      ++counts[write_canonical(m)];
    } catch (const Error &) {
      ++out.invalid;
    }
  }
  out.entries.assign(counts.begin(), counts.end());
  std::sort(out.entries.begin(), out.entries.end(),
            [](const auto &a, const auto &b) {
              if (a.second != b.second) {
                return a.second > b.second;
              }
              return a.first < b.first;
            });
  return out;
}

MetricRow topk_report(const RankedCandidates &ranked, const MolGraph &truth,
                      const TopkOptions &opts) {
  MetricRow row;
  row.truth_canonical = write_canonical(truth);
  row.n_valid = ranked.valid();
  row.n_invalid = ranked.invalid;
  row.n_atoms = static_cast<int>(truth.atoms.size());
  row.n_rotatable = rotatable_bond_count(truth);
  row.k_values = opts.k_values;

  const Fingerprint truth_fp = ecfp(truth, opts.fp_radius, opts.fp_nbits);

  // Metrics per candidate, computed once for the largest k.
  int max_k = 0;
  for (int k : opts.k_values) {
    if (k < 1) {
      throw Error("k values must be >= 1");
    }
    max_k = std::max(max_k, k);
  }
  const int avail = std::min<int>(max_k, static_cast<int>(ranked.entries.size()));
  std::vector<bool> is_hit(static_cast<std::size_t>(avail));
  std::vector<double> tani(static_cast<std::size_t>(avail));
  std::vector<int> mces(static_cast<std::size_t>(avail));
  for (int i = 0; i < avail; ++i) {
    const MolGraph cand = parse_smiles(ranked.entries[static_cast<std::size_t>(i)].first);
    is_hit[static_cast<std::size_t>(i)] =
        ranked.entries[static_cast<std::size_t>(i)].first == row.truth_canonical;
    tani[static_cast<std::size_t>(i)] =
        tanimoto(ecfp(cand, opts.fp_radius, opts.fp_nbits), truth_fp);
    const MCESResult r = mces_distance(cand, truth, opts.mces_budget);
    mces[static_cast<std::size_t>(i)] = r.distance;
    row.mces_exact = row.mces_exact && r.exact;
  }

  for (int k : opts.k_values) {
    const int n = std::min(k, avail);
    bool hit = false;
    std::optional<double> best_tani;
    std::optional<int> best_mces;
    for (int i = 0; i < n; ++i) {
      hit = hit || is_hit[static_cast<std::size_t>(i)];
      if (!best_tani || tani[static_cast<std::size_t>(i)] > *best_tani) {
        best_tani = tani[static_cast<std::size_t>(i)];
      }
      if (!best_mces || mces[static_cast<std::size_t>(i)] < *best_mces) {
        best_mces = mces[static_cast<std::size_t>(i)];
      }
    }
    row.hit.push_back(hit ? 1 : 0);
    row.max_tanimoto.push_back(best_tani);
    row.min_mces.push_back(best_mces);
  }
  return row;
}

namespace {

Summary mean_of_rows(const std::vector<const MetricRow *> &rows) {
  Summary s;
  s.n_rows = static_cast<int>(rows.size());
  if (rows.empty()) {
    return s;
  }
  s.k_values = rows.front()->k_values;
  const std::size_t nk = rows.front()->hit.size();
  s.hit.assign(nk, 0.0);
  std::vector<double> tani_sum(nk, 0.0);
  std::vector<int> tani_n(nk, 0);
  std::vector<double> mces_sum(nk, 0.0);
  std::vector<int> mces_n(nk, 0);
  double validity = 0.0;
  for (const MetricRow *r : rows) {
    const int total = r->n_valid + r->n_invalid;
    validity += total > 0 ? static_cast<double>(r->n_valid) / total : 0.0;
    for (std::size_t k = 0; k < nk; ++k) {
      s.hit[k] += r->hit[k];
      if (r->max_tanimoto[k]) {
        tani_sum[k] += *r->max_tanimoto[k];
        ++tani_n[k];
      }
      if (r->min_mces[k]) {
        mces_sum[k] += *r->min_mces[k];
        ++mces_n[k];
      }
    }
  }
  for (std::size_t k = 0; k < nk; ++k) {
    s.hit[k] /= static_cast<double>(rows.size());
    s.mean_tanimoto.push_back(
        tani_n[k] > 0 ? std::optional<double>(tani_sum[k] / tani_n[k]) : std::nullopt);
    s.mean_mces.push_back(
        mces_n[k] > 0 ? std::optional<double>(mces_sum[k] / mces_n[k]) : std::nullopt);
  }
  s.validity = validity / static_cast<double>(rows.size());
  return s;
}

// Element-wise mean of per-group summaries (for the per-unique grouping).
Summary mean_of_summaries(const std::vector<Summary> &groups) {
  Summary s;
  if (groups.empty()) {
    return s;
  }
  const std::size_t nk = groups.front().hit.size();
  s.k_values = groups.front().k_values;
  s.n_rows = static_cast<int>(groups.size());
  s.hit.assign(nk, 0.0);
  std::vector<double> tani_sum(nk, 0.0);
  std::vector<int> tani_n(nk, 0);
  std::vector<double> mces_sum(nk, 0.0);
  std::vector<int> mces_n(nk, 0);
  for (const Summary &g : groups) {
    for (std::size_t k = 0; k < nk; ++k) {
      s.hit[k] += g.hit[k];
      if (g.mean_tanimoto[k]) {
        tani_sum[k] += *g.mean_tanimoto[k];
        ++tani_n[k];
      }
      if (g.mean_mces[k]) {
        mces_sum[k] += *g.mean_mces[k];
        ++mces_n[k];
      }
    }
    s.validity += g.validity;
  }
  for (std::size_t k = 0; k < nk; ++k) {
    s.hit[k] /= static_cast<double>(groups.size());
    s.mean_tanimoto.push_back(
        tani_n[k] > 0 ? std::optional<double>(tani_sum[k] / tani_n[k]) : std::nullopt);
    s.mean_mces.push_back(
        mces_n[k] > 0 ? std::optional<double>(mces_sum[k] / mces_n[k]) : std::nullopt);
  }
  s.validity /= static_cast<double>(groups.size());
  return s;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

Summary aggregate(const std::vector<MetricRow> &rows, Grouping grouping) {
  if (rows.empty()) {
    throw Error("aggregate over an empty row set");
  }
  if (grouping == Grouping::PerSpectrum) {
    std::vector<const MetricRow *> ptrs;
    ptrs.reserve(rows.size());
    for (const auto &r : rows) {
      ptrs.push_back(&r);
    }
    return mean_of_rows(ptrs);
  }
  std::map<std::string, std::vector<const MetricRow *>> groups;
  for (const auto &r : rows) {
    groups[r.truth_canonical].push_back(&r);
  }
  std::vector<Summary> per_group;
  per_group.reserve(groups.size());
  for (const auto &[truth, members] : groups) {
    per_group.push_back(mean_of_rows(members));
  }
  return mean_of_summaries(per_group);
}

std::vector<StratBin> stratify(const std::vector<MetricRow> &rows,
                               StratProperty property,
                               const std::vector<double> &edges,
                               std::optional<std::pair<int, int>> atom_filter) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end())) {
    throw Error("stratify: edges must be monotone with at least two entries");
  }
  std::vector<StratBin> bins(edges.size() - 1);
  std::vector<std::vector<const MetricRow *>> members(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].lo = edges[b];
    bins[b].hi = edges[b + 1];
  }
  for (const auto &row : rows) {
    if (atom_filter &&
        (row.n_atoms < atom_filter->first || row.n_atoms > atom_filter->second)) {
      continue;
    }
    const double v = property == StratProperty::NAtoms
                         ? static_cast<double>(row.n_atoms)
                         : static_cast<double>(row.n_rotatable);
    for (std::size_t b = 0; b < bins.size(); ++b) {
      if (v >= bins[b].lo && v < bins[b].hi) {
        members[b].push_back(&row);
        break;
      }
    }
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].count = static_cast<int>(members[b].size());
    if (!members[b].empty()) {
      bins[b].summary = mean_of_rows(members[b]);
    }
  }
  return bins;
}

std::string report_csv(const std::vector<MetricRow> &rows,
                       const std::vector<int> &k_values) {
  std::string out = "spectrum_id,truth_smiles,n_valid,n_invalid";
  for (int k : k_values) {
    out += ",hit" + std::to_string(k);
  }
  for (int k : k_values) {
    out += ",tanimoto" + std::to_string(k);
  }
  for (int k : k_values) {
    out += ",mces" + std::to_string(k);
  }
  out += ",mces_exact,n_atoms,n_rot_bonds\n";
  for (const auto &r : rows) {
    out += r.spectrum_id + "," + r.truth_canonical + "," +
           std::to_string(r.n_valid) + "," + std::to_string(r.n_invalid);
    for (std::size_t k = 0; k < k_values.size(); ++k) {
      out += "," + std::to_string(r.hit[k]);
    }
    for (std::size_t k = 0; k < k_values.size(); ++k) {
      out += ",";
      out += r.max_tanimoto[k] ? format_real(*r.max_tanimoto[k]) : "NA";
    }
    for (std::size_t k = 0; k < k_values.size(); ++k) {
      out += ",";
      out += r.min_mces[k] ? std::to_string(*r.min_mces[k]) : "NA";
    }
    out += std::string(",") + (r.mces_exact ? "1" : "0") + "," +
           std::to_string(r.n_atoms) + "," + std::to_string(r.n_rotatable) + "\n";
  }
  return out;
}

std::string summary_text(const Summary &per_spectrum, const Summary &per_unique) {
  std::string out;
  auto emit = [&](const std::string &prefix, const Summary &s) {
    out += prefix + ".rows=" + std::to_string(s.n_rows) + "\n";
    for (std::size_t k = 0; k < s.k_values.size(); ++k) {
      const std::string suffix = std::to_string(s.k_values[k]);
      out += prefix + ".hit" + suffix + "=" + format_real(s.hit[k]) + "\n";
      out += prefix + ".tanimoto" + suffix + "=" +
             (s.mean_tanimoto[k] ? format_real(*s.mean_tanimoto[k]) : "NA") + "\n";
      out += prefix + ".mces" + suffix + "=" +
             (s.mean_mces[k] ? format_real(*s.mean_mces[k]) : "NA") + "\n";
    }
    out += prefix + ".validity=" + format_real(s.validity) + "\n";
  };
  emit("per_spectrum", per_spectrum);
  emit("per_unique_molecule", per_unique);
  return out;
}

}  // namespace safeflow
