//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <vector>

#include "safeflow/molgraph.hpp"

namespace safeflow {

// Hashed circular-substructure bit vector (ECFP-style).
struct Fingerprint {
  int nbits = 2048;
  int radius = 2;
  std::vector<std::uint64_t> words;

  bool bit(int k) const {
    return (words[static_cast<std::size_t>(k >> 6)] >> (k & 63)) & 1ULL;
  }
  int popcount() const;
};

// For each atom and each r in [0, radius], hashes the r-neighborhood
// environment and sets bit (hash mod nbits). The initial atom invariant is
// (element, heavy degree, implicit H, charge, ring flag); updates mix the
// sorted (bond order, neighbor hash) pairs with the radius index, so the
// result is invariant under atom relabeling.
Fingerprint ecfp(const MolGraph &m, int radius = 2, int nbits = 2048);

// |a AND b| / |a OR b|; 0 when both fingerprints are empty.
double tanimoto(const Fingerprint &a, const Fingerprint &b);

struct MCESResult {
  int distance = 0;
  bool exact = true;
  int common_edges = 0;
};

// Exact maximum-common-edge-subgraph distance via branch and bound over
// edge correspondences. Two edges are compatible when their bond orders
// match and their endpoint elements match as an unordered labeled pair;
// accepted pairs must induce a consistent partial atom bijection.
// distance = |E1| + |E2| - 2 * common_edges. When the node-expansion
// budget runs out, returns the best lower bound found with exact=false.
MCESResult mces_distance(const MolGraph &a, const MolGraph &b,
                         long long budget = 10'000'000);

// Single non-ring bonds whose endpoints are both non-terminal heavy atoms.
int rotatable_bond_count(const MolGraph &m);

}  // namespace safeflow
