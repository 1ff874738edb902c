//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "safeflow/molgraph.hpp"

namespace safeflow {

// Aromaticity requirement of a pattern atom.
enum class AromMode : std::uint8_t { NonAromatic, Aromatic, Any };

struct PatternAtom {
  std::optional<Element> element;  // nullopt = wildcard 'X'
  AromMode aromatic = AromMode::NonAromatic;
  std::optional<int> charge;       // set only by bracket patterns
  int min_hydrogens = 0;
};

struct PatternBond {
  int a = 0;
  int b = 0;
  int order = -1;            // BondOrder value, or -1 for '~' wildcard
  bool require_ring = false; // '@' marker
};

// A small substructure query parsed from the pattern mini-language:
// uppercase element = that element, non-aromatic; lowercase = aromatic;
// 'X' = any element, any aromaticity; bonds - = # : plus '~' (any order)
// and '@' (must be a ring bond); branches and single-digit ring closures;
// brackets for charge ([O-]) and minimum hydrogen count ([SH]).
struct PatternGraph {
  std::string name;
  std::vector<PatternAtom> atoms;
  std::vector<PatternBond> bonds;
};

PatternGraph parse_pattern(std::string name, std::string_view text);

// True when the pattern occurs as a (not necessarily induced) subgraph.
bool matches_pattern(const MolGraph &m, const PatternGraph &p);

// Names handled procedurally rather than by subgraph patterns.
inline constexpr const char *kHeteroaromatic = "heteroaromatic";
inline constexpr const char *kPolycyclicAromatic = "polycyclic_aromatic";

struct PatternTable {
  std::vector<PatternGraph> patterns;       // several lines may share a name
  std::vector<std::string> group_names;     // distinct, includes procedural

  bool knows(std::string_view name) const;
};

// Pattern file: one "<name> <pattern>" per line; '#' comments and blank
// lines ignored. The procedural groups are always part of the universe.
PatternTable parse_pattern_table(std::string_view text);
PatternTable load_patterns(const std::string &path);

// All group names present in the molecule.
std::set<std::string> functional_groups(const MolGraph &m, const PatternTable &table);

struct FgScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Set precision/recall/F1 with the vacuous-agreement convention: both sets
// empty scores (1, 1, 1). Unknown group names are rejected.
FgScores fg_scores(const std::set<std::string> &truth,
                   const std::set<std::string> &pred,
                   const PatternTable &table);

}  // namespace safeflow
