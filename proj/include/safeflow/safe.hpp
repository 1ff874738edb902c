//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <string>
#include <vector>

#include "safeflow/molgraph.hpp"
#include "safeflow/rng.hpp"

namespace safeflow {

// A SAFE string: dot-joined fragment SMILES whose severed bonds are
// expressed as ring-closure digit pairs spanning the dots. Any plain
// SMILES is the degenerate single-fragment case.
using SafeString = std::string;

// Bonds eligible for fragmentation: acyclic single bonds between two
// heavy atoms of degree >= 2, in bond-index order.
std::vector<int> find_cuts(const MolGraph &m);

// find_cuts capped to the lowest `max_cuts` bond indices; the rendering
// used for training data.
std::vector<int> training_cuts(const MolGraph &m, int max_cuts = 8);

// Renders `m` as dot-joined fragments with each cut bond replaced by an
// attachment digit pair. Attachment digits are the smallest closure
// numbers (1, 2, ...); fragment-internal ring closures allocate above
// them. With no cuts this is exactly write_canonical(m).
SafeString encode_safe(const MolGraph &m, const std::vector<int> &cuts);

// parse_smiles with cross-dot closure pairing; propagates parse errors
// (a dangling attachment digit is an unmatched ring closure).
MolGraph decode_safe(const SafeString &s);

// Fragment-level helpers. '.' never occurs inside a token, so this is a
// plain split/join.
std::vector<std::string> split_fragments(const SafeString &s);
SafeString join_fragments(const std::vector<std::string> &fragments);
SafeString permute_fragments(const SafeString &s, Rng &rng);

}  // namespace safeflow
