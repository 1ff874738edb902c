//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "safeflow/evalharness.hpp"
#include "safeflow/molgraph.hpp"

using namespace safeflow;

namespace {

RankedCandidates ranked_from(const std::vector<std::pair<std::string, int>> &entries,
                             int invalid = 0) {
  RankedCandidates r;
  r.entries = entries;
  r.invalid = invalid;
  for (const auto &[s, c] : entries) {
    r.total_samples += c;
  }
  r.total_samples += invalid;
  return r;
}

}  // namespace

TEST_CASE("rank_by_frequency") {
  SUBCASE("counts and orders canonical forms") {
    // "OCC" canonicalizes to the same molecule as "CCO".
    const RankedCandidates r = rank_by_frequency(
        {"CCO", "OCC", "CCN", "CCO", "CC", "CCN", "CCO"});
    REQUIRE(r.entries.size() == 3);
    CHECK(r.entries[0].first == write_canonical(parse_smiles("CCO")));
    CHECK(r.entries[0].second == 4);
    CHECK(r.entries[1].second == 2);
    CHECK(r.entries[2].second == 1);
    CHECK(r.invalid == 0);
    CHECK(r.valid() == 7);
  }
  SUBCASE("ties break lexicographically") {
    const RankedCandidates r = rank_by_frequency({"CCO", "CCN"});
    REQUIRE(r.entries.size() == 2);
    CHECK(r.entries[0].first < r.entries[1].first);
  }
  SUBCASE("unparseable strings count as invalid") {
    const RankedCandidates r = rank_by_frequency({"C(", "xx", "CCO", ""});
    CHECK(r.invalid == 3);
    CHECK(r.entries.size() == 1);
  }
  SUBCASE("input order does not matter") {
    const std::vector<std::string> a = {"CCO", "CCN", "CCO", "CC"};
    std::vector<std::string> b = {"CC", "CCO", "CCN", "CCO"};
    CHECK(rank_by_frequency(a).entries == rank_by_frequency(b).entries);
  }
  SUBCASE("SAFE strings with attachments rank as their molecule") {
    const RankedCandidates r = rank_by_frequency({"CC1.CC1", "CCCC"});
    REQUIRE(r.entries.size() == 1);
    CHECK(r.entries[0].second == 2);
  }
}

TEST_CASE("topk_report") {
  const MolGraph truth = parse_smiles("CCO");
  const std::string truth_canon = write_canonical(truth);
  TopkOptions opts;

  SUBCASE("truth at rank zero") {
    const MetricRow row = topk_report(
        ranked_from({{truth_canon, 60}, {write_canonical(parse_smiles("CCN")), 40}}),
        truth, opts);
    CHECK(row.hit[0] == 1);
    CHECK(row.hit[1] == 1);
    CHECK(*row.max_tanimoto[0] == 1.0);
    CHECK(*row.min_mces[0] == 0);
    CHECK(row.mces_exact);
  }
  SUBCASE("truth at rank five only hits top ten") {
    std::vector<std::pair<std::string, int>> entries;
    const char *decoys[] = {"CCN", "CCC", "CCCC", "CC", "C"};
    int count = 10;
    for (const char *d : decoys) {
      entries.emplace_back(write_canonical(parse_smiles(d)), count--);
    }
    entries.emplace_back(truth_canon, 1);
    const MetricRow row = topk_report(ranked_from(entries), truth, opts);
    CHECK(row.hit[0] == 0);
    CHECK(row.hit[1] == 1);
    CHECK(*row.max_tanimoto[1] == 1.0);
    CHECK(*row.min_mces[1] == 0);
  }
  SUBCASE("truth absent") {
    const MetricRow row = topk_report(
        ranked_from({{write_canonical(parse_smiles("CCN")), 100}}), truth, opts);
    CHECK(row.hit[0] == 0);
    CHECK(row.hit[1] == 0);
    CHECK(*row.max_tanimoto[0] < 1.0);
    CHECK(*row.min_mces[0] > 0);
  }
  SUBCASE("empty candidates yield null sentinels") {
    const MetricRow row = topk_report(ranked_from({}, 100), truth, opts);
    CHECK(row.hit[0] == 0);
    CHECK_FALSE(row.max_tanimoto[0].has_value());
    CHECK_FALSE(row.min_mces[0].has_value());
    CHECK(row.n_invalid == 100);
    CHECK(row.n_valid == 0);
  }
  SUBCASE("per-row monotonicity in k") {
    TopkOptions many;
    many.k_values = {1, 2, 3, 5, 10};
    std::vector<std::pair<std::string, int>> entries;
    const char *mols[] = {"CCN", "CCC", "CCO", "CC", "CCCC", "CCCN"};
    int count = 20;
    for (const char *m : mols) {
      entries.emplace_back(write_canonical(parse_smiles(m)), count--);
    }
    const MetricRow row = topk_report(ranked_from(entries), truth, many);
    for (std::size_t k = 1; k < many.k_values.size(); ++k) {
      CHECK(row.hit[k] >= row.hit[k - 1]);
      CHECK(*row.max_tanimoto[k] >= *row.max_tanimoto[k - 1]);
      CHECK(*row.min_mces[k] <= *row.min_mces[k - 1]);
    }
  }
}

TEST_CASE("aggregate per spectrum vs per unique molecule") {
  // One molecule with 99 correct spectra plus 99 distinct molecules each
  // with one incorrect spectrum: 0.5 per-spectrum, 0.01 per-unique.
  std::vector<MetricRow> rows;
  auto make_row = [](const std::string &truth, bool hit) {
    MetricRow r;
    r.truth_canonical = truth;
    r.k_values = {1};
    r.hit = {hit ? 1 : 0};
    r.max_tanimoto = {hit ? std::optional<double>(1.0) : std::optional<double>(0.2)};
    r.min_mces = {hit ? std::optional<int>(0) : std::optional<int>(5)};
    r.n_valid = 100;
    r.n_invalid = 0;
    return r;
  };
  for (int i = 0; i < 99; ++i) {
    rows.push_back(make_row("popular", true));
  }
  for (int i = 0; i < 99; ++i) {
    rows.push_back(make_row("mol" + std::to_string(i), false));
  }
  const Summary per_spectrum = aggregate(rows, Grouping::PerSpectrum);
  const Summary per_unique = aggregate(rows, Grouping::PerUniqueMolecule);
  CHECK(per_spectrum.hit[0] == doctest::Approx(0.5));
  CHECK(per_unique.hit[0] == doctest::Approx(0.01));

  SUBCASE("equal when every molecule has one spectrum") {
    std::vector<MetricRow> flat;
    for (int i = 0; i < 10; ++i) {
      flat.push_back(make_row("m" + std::to_string(i), i % 2 == 0));
    }
    const Summary a = aggregate(flat, Grouping::PerSpectrum);
    const Summary b = aggregate(flat, Grouping::PerUniqueMolecule);
    CHECK(a.hit[0] == doctest::Approx(b.hit[0]));
  }
  SUBCASE("all rows same molecule makes both groupings equal") {
    std::vector<MetricRow> same;
    same.push_back(make_row("m", true));
    same.push_back(make_row("m", false));
    CHECK(aggregate(same, Grouping::PerSpectrum).hit[0] ==
          doctest::Approx(aggregate(same, Grouping::PerUniqueMolecule).hit[0]));
  }
}

TEST_CASE("stratify") {
  auto make_row = [](int atoms, int rot, bool hit) {
    MetricRow r;
    r.truth_canonical = "m";
    r.k_values = {1};
    r.hit = {hit ? 1 : 0};
    r.max_tanimoto = {0.5};
    r.min_mces = {1};
    r.n_atoms = atoms;
    r.n_rotatable = rot;
    r.n_valid = 1;
    return r;
  };
  SUBCASE("half-open bin assignment") {
    std::vector<MetricRow> rows = {make_row(10, 0, true)};
    const auto bins = stratify(rows, StratProperty::NAtoms, {0.0, 10.0, 20.0, 1e9});
    REQUIRE(bins.size() == 3);
    CHECK(bins[0].count == 0);
    CHECK(bins[1].count == 1);  // 10 lands in [10, 20)
    CHECK(bins[2].count == 0);
    CHECK_FALSE(bins[0].summary.has_value());
    CHECK(bins[1].summary.has_value());
  }
  SUBCASE("flexibility analysis shape: atom filter plus rotatable bins") {
    std::vector<MetricRow> rows;
    rows.push_back(make_row(22, 2, true));    // rigid, in filter
    rows.push_back(make_row(23, 5, false));   // medium, in filter
    rows.push_back(make_row(24, 9, true));    // flexible, in filter
    rows.push_back(make_row(30, 9, false));   // outside atom filter
    const auto bins = stratify(rows, StratProperty::NRotatable, {0.0, 4.0, 7.0, 1e9},
                               std::pair<int, int>{20, 25});
    REQUIRE(bins.size() == 3);
    CHECK(bins[0].count == 1);
    CHECK(bins[1].count == 1);
    CHECK(bins[2].count == 1);
    CHECK(bins[0].summary->hit[0] == doctest::Approx(1.0));
    CHECK(bins[1].summary->hit[0] == doctest::Approx(0.0));
  }
  SUBCASE("bad edges are rejected") {
    std::vector<MetricRow> rows = {make_row(5, 1, true)};
    CHECK_THROWS_AS(stratify(rows, StratProperty::NAtoms, {5.0}), Error);
    CHECK_THROWS_AS(stratify(rows, StratProperty::NAtoms, {10.0, 0.0}), Error);
  }
}

TEST_CASE("report csv layout") {
  const MolGraph truth = parse_smiles("CCO");
  TopkOptions opts;
  MetricRow row = topk_report(
      ranked_from({{write_canonical(truth), 3}}, 1), truth, opts);
  row.spectrum_id = "7";
  const std::string csv = report_csv({row}, opts.k_values);
  CHECK(csv.rfind("spectrum_id,truth_smiles,n_valid,n_invalid,hit1,hit10,"
                  "tanimoto1,tanimoto10,mces1,mces10,mces_exact,n_atoms,n_rot_bonds\n",
                  0) == 0);
  CHECK(csv.find("\n7,") != std::string::npos);
  CHECK(csv.find(",NA") == std::string::npos);

  MetricRow empty_row = topk_report(ranked_from({}, 4), truth, opts);
  empty_row.spectrum_id = "8";
  const std::string csv2 = report_csv({empty_row}, opts.k_values);
  CHECK(csv2.find("NA") != std::string::npos);
}
