//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "safeflow/error.hpp"

namespace safeflow {

// Heavy elements supported by the parser. Hydrogens are always implicit.
enum class Element : std::uint8_t { B, C, N, O, P, S, F, Cl, Br, I };

enum class BondOrder : std::uint8_t { Single, Double, Triple, Aromatic };

const char *element_symbol(Element e);
std::optional<Element> element_from_symbol(std::string_view s);

// True for elements that may carry the aromatic flag (B, C, N, O, P, S).
bool element_can_be_aromatic(Element e);

// Accepted total valences for the element at the given formal charge.
// Empty when the combination is unsupported.
std::vector<int> allowed_valences(Element e, int charge);

struct Atom {
  Element element = Element::C;
  int formal_charge = 0;
  int hcount = 0;  // implicit+explicit hydrogens, resolved at parse time
  bool aromatic = false;
  bool in_ring = false;  // derived
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
  bool in_ring = false;  // derived

  int other(int atom) const { return atom == a ? b : a; }
};

// A labeled molecular graph. Atom order is significant only as an input
// labeling; all comparisons go through the canonical writer.
struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  // adjacency()[i] lists (neighbor atom index, bond index).
  std::vector<std::vector<std::pair<int, int>>> adjacency() const;
  int degree(int atom) const;
  int component_count() const;
};

// Integer contribution of a bond order to a valence sum (aromatic counts
// as 1; callers that need the extra half handle it separately).
int bond_order_int(BondOrder o);

// Parses the supported SMILES subset: organic-subset atoms, aromatic
// lowercase, bracket atoms with H-count and charge, bonds - = # :,
// branches, ring closures 1-9 and %nn, and dot-separated components.
// Ring-closure digits pair across dots, which is how fragment attachment
// points are expressed. Stereo markers (/ \ @) are accepted and dropped;
// isotopes and wildcards are rejected. Throws ParseError with the byte
// offset of the offending character.
MolGraph parse_smiles(std::string_view text);

// Deterministic canonical SMILES. Atom ranks come from Morgan-style
// iterative invariant refinement with smallest-index symmetry breaking;
// the string is invariant under relabeling of the input atoms and
// round-trips through parse_smiles to an isomorphic graph.
std::string write_canonical(const MolGraph &m);

// Canonical atom ranks (a permutation of 0..n-1) used by the writer.
std::vector<int> canonical_ranks(const MolGraph &m);

bool mol_equal(const MolGraph &a, const MolGraph &b);

namespace detail {

// Shared between the canonical writer and the fragment encoder: writes one
// connected component, appending preassigned extra closure digits (used
// for severed-bond attachment points) after each atom's own ring closures.
// `hgraph` supplies the bond environment used to decide whether an atom
// needs brackets; it must contain every bond the re-parsed string will
// have (for fragments this is the uncut parent graph).
struct ComponentWriteSpec {
  const MolGraph *graph = nullptr;   // traversal graph
  const MolGraph *hgraph = nullptr;  // bond context for H/bracket decisions
  const std::vector<int> *ranks = nullptr;
  std::vector<int> component_atoms;
  std::vector<std::vector<int>> attachment_digits;  // per atom of graph
  int first_free_ring_digit = 1;
};

std::string write_component(const ComponentWriteSpec &spec);

}  // namespace detail

}  // namespace safeflow
