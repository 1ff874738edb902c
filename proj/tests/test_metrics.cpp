//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "safeflow/metrics.hpp"
#include "safeflow/molgraph.hpp"
#include "safeflow/patterns.hpp"
#include "safeflow/rng.hpp"
#include "test_support.hpp"

using namespace safeflow;

namespace {

// Exhaustive MCES oracle: enumerate every consistent injective mapping of
// edge subsets, no pruning beyond feasibility. Only usable on tiny graphs.
struct ExhaustiveMces {
  const MolGraph &a;
  const MolGraph &b;
  std::vector<char> b_used;
  std::vector<int> ab, ba;
  int best = 0;

  ExhaustiveMces(const MolGraph &ga, const MolGraph &gb)
      : a(ga), b(gb), b_used(gb.bonds.size(), 0),
        ab(ga.atoms.size(), -1), ba(gb.atoms.size(), -1) { }

  static bool edge_compatible(const MolGraph &ga, const Bond &ea,
                              const MolGraph &gb, const Bond &eb) {
    if (ea.order != eb.order) {
      return false;
    }
    int a1 = static_cast<int>(ga.atoms[static_cast<std::size_t>(ea.a)].element);
    int a2 = static_cast<int>(ga.atoms[static_cast<std::size_t>(ea.b)].element);
    int b1 = static_cast<int>(gb.atoms[static_cast<std::size_t>(eb.a)].element);
    int b2 = static_cast<int>(gb.atoms[static_cast<std::size_t>(eb.b)].element);
    if (a1 > a2) {
      std::swap(a1, a2);
    }
    if (b1 > b2) {
      std::swap(b1, b2);
    }
    return a1 == b1 && a2 == b2;
  }

  bool bind(int x, int y, std::vector<std::pair<int, int>> &undo) {
    if (ab[static_cast<std::size_t>(x)] == y) {
      return true;
    }
    if (ab[static_cast<std::size_t>(x)] != -1 || ba[static_cast<std::size_t>(y)] != -1) {
      return false;
    }
    ab[static_cast<std::size_t>(x)] = y;
    ba[static_cast<std::size_t>(y)] = x;
    undo.emplace_back(x, y);
    return true;
  }

  void run(std::size_t ei, int matched) {
    best = std::max(best, matched);
    if (ei >= a.bonds.size()) {
      return;
    }
    const Bond &ea = a.bonds[ei];
    for (std::size_t ej = 0; ej < b.bonds.size(); ++ej) {
      if (b_used[ej] || !edge_compatible(a, ea, b, b.bonds[ej])) {
        continue;
      }
      const Bond &eb = b.bonds[ej];
      for (int orient = 0; orient < 2; ++orient) {
        const int y1 = orient == 0 ? eb.a : eb.b;
        const int y2 = orient == 0 ? eb.b : eb.a;
        std::vector<std::pair<int, int>> undo;
        if (bind(ea.a, y1, undo) && bind(ea.b, y2, undo)) {
          b_used[ej] = 1;
          run(ei + 1, matched + 1);
          b_used[ej] = 0;
        }
        for (const auto &[x, y] : undo) {
          ab[static_cast<std::size_t>(x)] = -1;
          ba[static_cast<std::size_t>(y)] = -1;
        }
      }
    }
    run(ei + 1, matched);
  }

  int solve() {
    run(0, 0);
    return static_cast<int>(a.bonds.size() + b.bonds.size()) - 2 * best;
  }
};

// Random connected labeled graph with at most 8 edges.
MolGraph random_graph(Rng &rng, int max_extra_edges) {
  const int n = 2 + rng.next_below(5);  // 2..6 atoms
  MolGraph m;
  const Element elements[] = {Element::C, Element::N, Element::O};
  for (int i = 0; i < n; ++i) {
    Atom a;
    a.element = elements[rng.next_below(3)];
    m.atoms.push_back(a);
  }
  for (int i = 1; i < n; ++i) {
    Bond b;
    b.a = rng.next_below(i);
    b.b = i;
    b.order = rng.next_below(4) == 0 ? BondOrder::Double : BondOrder::Single;
    m.bonds.push_back(b);
  }
  for (int extra = rng.next_below(max_extra_edges + 1); extra > 0; --extra) {
    const int x = rng.next_below(n);
    const int y = rng.next_below(n);
    if (x == y) {
      continue;
    }
    bool dup = false;
    for (const auto &b : m.bonds) {
      if ((b.a == x && b.b == y) || (b.a == y && b.b == x)) {
        dup = true;
        break;
      }
    }
    if (dup || static_cast<int>(m.bonds.size()) >= 8) {
      continue;
    }
    Bond b;
    b.a = x;
    b.b = y;
    b.order = rng.next_below(4) == 0 ? BondOrder::Double : BondOrder::Single;
    m.bonds.push_back(b);
  }
  return m;
}

const PatternTable &table() {
  static const PatternTable t =
      load_patterns(testing::source_dir() + "/data/functional_groups.txt");
  return t;
}

}  // namespace

TEST_CASE("ecfp environment counts and invariance") {
  SUBCASE("methane sets at most three bits from three hashes") {
    const Fingerprint fp = ecfp(parse_smiles("C"), 2, 2048);
    CHECK(fp.popcount() >= 1);
    CHECK(fp.popcount() <= 3);
  }
  SUBCASE("bit-for-bit relabel invariance") {
    const Fingerprint a = ecfp(parse_smiles("CCO"));
    const Fingerprint b = ecfp(parse_smiles("OCC"));
    CHECK(a.words == b.words);
  }
  SUBCASE("random relabelings preserve the fingerprint") {
    const MolGraph m = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
    const Fingerprint ref = ecfp(m);
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const auto perm = testing::random_permutation(static_cast<int>(m.atoms.size()), rng);
      CHECK(ecfp(testing::permute_graph(m, perm)).words == ref.words);
    }
  }
  SUBCASE("ethanol and dimethyl ether differ at radius >= 1") {
    CHECK(ecfp(parse_smiles("CCO"), 1, 2048).words !=
          ecfp(parse_smiles("COC"), 1, 2048).words);
  }
  SUBCASE("argument validation") {
    CHECK_THROWS_AS(ecfp(parse_smiles("C"), -1, 2048), Error);
    CHECK_THROWS_AS(ecfp(parse_smiles("C"), 2, 1000), Error);
  }
}

TEST_CASE("tanimoto") {
  const Fingerprint f = ecfp(parse_smiles("CCO"));
  CHECK(tanimoto(f, f) == 1.0);

  Fingerprint a;
  a.nbits = 64;
  a.words = {0b00011};
  Fingerprint b = a;
  b.words = {0b01100};
  CHECK(tanimoto(a, b) == 0.0);

  a.words = {0b11011};
  b.words = {0b01110};  // and = 0b01010 (2 bits), or = 0b11111 (5 bits)
  CHECK(tanimoto(a, b) == doctest::Approx(0.4));

  Fingerprint empty1;
  empty1.nbits = 64;
  empty1.words = {0};
  CHECK(tanimoto(empty1, empty1) == 0.0);

  Fingerprint other;
  other.nbits = 128;
  other.words = {0, 0};
  CHECK_THROWS_AS(tanimoto(a, other), Error);
}

TEST_CASE("mces on known pairs") {
  SUBCASE("identical molecules have distance zero") {
    const MolGraph e = parse_smiles("CCO");
    const MCESResult r = mces_distance(e, e);
    CHECK(r.distance == 0);
    CHECK(r.exact);
    CHECK(r.common_edges == 2);
  }
  SUBCASE("ethane vs propane") {
    const MCESResult r = mces_distance(parse_smiles("CC"), parse_smiles("CCC"));
    CHECK(r.common_edges == 1);
    CHECK(r.distance == 1);
    CHECK(r.exact);
  }
  SUBCASE("benzene vs cyclohexane share no edges") {
    const MCESResult r =
        mces_distance(parse_smiles("c1ccccc1"), parse_smiles("C1CCCCC1"));
    CHECK(r.common_edges == 0);
    CHECK(r.distance == 12);
    CHECK(r.exact);
  }
  SUBCASE("symmetry") {
    const MolGraph a = parse_smiles("CC(C)O");
    const MolGraph b = parse_smiles("CCCN");
    CHECK(mces_distance(a, b).distance == mces_distance(b, a).distance);
  }
  SUBCASE("distance is bounded below by the edge-count gap") {
    const MolGraph a = parse_smiles("CCCCCC");
    const MolGraph b = parse_smiles("CC");
    CHECK(mces_distance(a, b).distance >= 4);
  }
  SUBCASE("budget exhaustion reports a bound, not a lie") {
    const MolGraph a = parse_smiles("CC(C)CC(C)CN");
    const MolGraph b = parse_smiles("CC(C)CC(C)CO");
    const MCESResult r = mces_distance(a, b, 5);
    CHECK_FALSE(r.exact);
    const MCESResult full = mces_distance(a, b);
    CHECK(full.exact);
    CHECK(r.common_edges <= full.common_edges);
  }
}

TEST_CASE("mces equals the exhaustive oracle on random graph pairs") {
  Rng rng(20240102);
  for (int trial = 0; trial < 100; ++trial) {
    const MolGraph a = random_graph(rng, 3);
    const MolGraph b = random_graph(rng, 3);
    CAPTURE(trial);
    ExhaustiveMces oracle(a, b);
    const int expect = oracle.solve();
    const MCESResult got = mces_distance(a, b);
    CHECK(got.exact);
    CHECK(got.distance == expect);
  }
}

TEST_CASE("rotatable bond count") {
  CHECK(rotatable_bond_count(parse_smiles("CCCC")) == 1);
  CHECK(rotatable_bond_count(parse_smiles("c1ccccc1")) == 0);
  CHECK(rotatable_bond_count(parse_smiles("c1ccccc1-c1ccccc1")) == 1);
  CHECK(rotatable_bond_count(parse_smiles("CC")) == 0);
  CHECK(rotatable_bond_count(parse_smiles("CCCCCC")) == 3);
}

TEST_CASE("functional group patterns") {
  const PatternTable &t = table();
  SUBCASE("ethyl acetate is an ester and nothing else") {
    const auto groups = functional_groups(parse_smiles("CCOC(C)=O"), t);
    CHECK(groups == std::set<std::string>{"ester"});
  }
  SUBCASE("acetonitrile is a nitrile") {
    CHECK(functional_groups(parse_smiles("CC#N"), t) ==
          std::set<std::string>{"nitrile"});
  }
  SUBCASE("benzene matches nothing") {
    CHECK(functional_groups(parse_smiles("c1ccccc1"), t).empty());
  }
  SUBCASE("named group spot checks") {
    auto has = [&](const char *smiles, const char *group) {
      const auto g = functional_groups(parse_smiles(smiles), t);
      return g.count(group) > 0;
    };
    CHECK(has("CC(=O)N", "amide"));
    CHECK(has("CC(=O)[O-]", "carboxylate"));
    CHECK(has("O=C1CCCO1", "lactone"));
    CHECK(has("O=C1CCCO1", "ester"));  // lactones are cyclic esters
    CHECK_FALSE(has("CCOC(C)=O", "lactone"));
    CHECK(has("CS(=O)C", "sulfoxide"));
    CHECK(has("CS(=O)(=O)C", "sulfone"));
    CHECK(has("CSC", "thioether"));
    CHECK(has("CS", "thiol"));
    CHECK_FALSE(has("CSC", "thiol"));
    CHECK(has("OP(=O)(O)OC", "phosphate"));
    CHECK(has("CP(=O)(O)O", "phosphonate"));
    CHECK_FALSE(has("OP(=O)(O)O", "phosphonate"));
    CHECK(has("C[N+](=O)[O-]", "nitro"));
    CHECK(has("CN(=O)=O", "nitro"));
    CHECK(has("CN=[N+]=[N-]", "azide"));
    CHECK(has("C1OC1", "epoxide"));
    CHECK(has("COOC", "peroxide"));
    CHECK_FALSE(has("COC", "peroxide"));
    CHECK(has("c1ccncc1", "heteroaromatic"));
    CHECK_FALSE(has("c1ccccc1", "heteroaromatic"));
    CHECK(has("c1ccc2ccccc2c1", "polycyclic_aromatic"));
    CHECK_FALSE(has("c1ccccc1-c1ccccc1", "polycyclic_aromatic"));
  }
  SUBCASE("matches are relabel invariant") {
    const MolGraph m = parse_smiles("CCOC(C)=O");
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const auto perm = testing::random_permutation(static_cast<int>(m.atoms.size()), rng);
      CHECK(functional_groups(testing::permute_graph(m, perm), t) ==
            std::set<std::string>{"ester"});
    }
  }
}

TEST_CASE("fg_scores") {
  const PatternTable &t = table();
  SUBCASE("hand example") {
    const FgScores s = fg_scores({"ester", "amide"}, {"ester", "nitro"}, t);
    CHECK(s.precision == doctest::Approx(0.5));
    CHECK(s.recall == doctest::Approx(0.5));
    CHECK(s.f1 == doctest::Approx(0.5));
  }
  SUBCASE("perfect agreement") {
    const FgScores s = fg_scores({"ester"}, {"ester"}, t);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    CHECK(s.f1 == 1.0);
  }
  SUBCASE("both empty scores one by convention") {
    const FgScores s = fg_scores({}, {}, t);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    CHECK(s.f1 == 1.0);
  }
  SUBCASE("one side empty") {
    const FgScores s = fg_scores({"ester"}, {}, t);
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);
  }
  SUBCASE("unknown names are rejected") {
    CHECK_THROWS_AS(fg_scores({"plutonium"}, {}, t), DataError);
  }
}
