//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/safe.hpp"

#include <algorithm>
#include <set>

namespace safeflow {

std::vector<int> find_cuts(const MolGraph &m) {
  std::vector<int> degree(m.atoms.size(), 0);
  for (const auto &b : m.bonds) {
    ++degree[static_cast<std::size_t>(b.a)];
    ++degree[static_cast<std::size_t>(b.b)];
  }
  std::vector<int> cuts;
  for (int bi = 0; bi < static_cast<int>(m.bonds.size()); ++bi) {
    const Bond &b = m.bonds[static_cast<std::size_t>(bi)];
    if (b.in_ring || b.order != BondOrder::Single) {
      continue;
    }
    if (degree[static_cast<std::size_t>(b.a)] < 2 ||
        degree[static_cast<std::size_t>(b.b)] < 2) {
      continue;
    }
    cuts.push_back(bi);
  }
  return cuts;
}

std::vector<int> training_cuts(const MolGraph &m, int max_cuts) {
  std::vector<int> cuts = find_cuts(m);
  if (static_cast<int>(cuts.size()) > max_cuts) {
    cuts.resize(static_cast<std::size_t>(max_cuts));
  }
  return cuts;
}

SafeString encode_safe(const MolGraph &m, const std::vector<int> &cuts) {
  if (cuts.empty()) {
    return write_canonical(m);
  }
  std::set<int> cut_set;
  for (int c : cuts) {
    if (c < 0 || c >= static_cast<int>(m.bonds.size())) {
      throw Error("cut index out of range: " + std::to_string(c));
    }
    const Bond &b = m.bonds[static_cast<std::size_t>(c)];
    if (b.in_ring) {
      throw Error("cut bond is in a ring: " + std::to_string(c));
    }
    if (b.order != BondOrder::Single) {
      throw Error("cut bond must be a single bond: " + std::to_string(c));
    }
    if (!cut_set.insert(c).second) {
      throw Error("duplicate cut index: " + std::to_string(c));
    }
  }

  // Graph with the cut bonds removed; atoms (and their resolved hydrogen
  // counts) are unchanged because the attachment digits stand in for the
  // severed bonds when the string is re-parsed.
  MolGraph cut_graph;
  cut_graph.atoms = m.atoms;
  for (int bi = 0; bi < static_cast<int>(m.bonds.size()); ++bi) {
    if (!cut_set.count(bi)) {
      cut_graph.bonds.push_back(m.bonds[static_cast<std::size_t>(bi)]);
    }
  }

  // Attachment digits: smallest closure numbers, in cut bond-index order.
  std::vector<std::vector<int>> attach(m.atoms.size());
  int next_digit = 1;
  for (int bi : cut_set) {
    const Bond &b = m.bonds[static_cast<std::size_t>(bi)];
    attach[static_cast<std::size_t>(b.a)].push_back(next_digit);
    attach[static_cast<std::size_t>(b.b)].push_back(next_digit);
    ++next_digit;
  }

  const std::vector<int> ranks = canonical_ranks(cut_graph);

  // Fragments = connected components of the cut graph, ordered by their
  // smallest original atom index.
  const auto adj = cut_graph.adjacency();
  std::vector<int> comp(cut_graph.atoms.size(), -1);
  std::vector<std::vector<int>> fragments;
  for (std::size_t root = 0; root < cut_graph.atoms.size(); ++root) {
    if (comp[root] >= 0) {
      continue;
    }
    const int c = static_cast<int>(fragments.size());
    fragments.emplace_back();
    std::vector<int> stack = {static_cast<int>(root)};
    comp[root] = c;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      fragments[static_cast<std::size_t>(c)].push_back(u);
      for (const auto &[v, bi] : adj[static_cast<std::size_t>(u)]) {
        if (comp[static_cast<std::size_t>(v)] < 0) {
          comp[static_cast<std::size_t>(v)] = c;
          stack.push_back(v);
        }
      }
    }
  }

  std::vector<std::string> parts;
  parts.reserve(fragments.size());
  for (auto &frag : fragments) {
    std::sort(frag.begin(), frag.end());
    detail::ComponentWriteSpec spec;
    spec.graph = &cut_graph;
    spec.hgraph = &m;
    spec.ranks = &ranks;
    spec.component_atoms = frag;
    spec.attachment_digits = attach;
    spec.first_free_ring_digit = next_digit;
    parts.push_back(detail::write_component(spec));
  }
  return join_fragments(parts);
}

MolGraph decode_safe(const SafeString &s) { return parse_smiles(s); }

std::vector<std::string> split_fragments(const SafeString &s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = s.find('.', start);
    if (dot == std::string::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, dot - start));
    start = dot + 1;
  }
}

SafeString join_fragments(const std::vector<std::string> &fragments) {
  std::string out;
  for (std::size_t k = 0; k < fragments.size(); ++k) {
    if (k > 0) {
      out += ".";
    }
    out += fragments[k];
  }
  return out;
}

SafeString permute_fragments(const SafeString &s, Rng &rng) {
  std::vector<std::string> parts = split_fragments(s);
  rng.shuffle(parts);
  return join_fragments(parts);
}

}  // namespace safeflow
