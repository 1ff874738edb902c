//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/metrics.hpp"

#include <algorithm>
#include <bit>
#include <utility>

namespace safeflow {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  h *= 0xFF51AFD7ED558CCDULL;
  h ^= h >> 33;
  return h;
}

}  // namespace

int Fingerprint::popcount() const {
  int n = 0;
  for (std::uint64_t w : words) {
    n += std::popcount(w);
  }
  return n;
}

Fingerprint ecfp(const MolGraph &m, int radius, int nbits) {
  if (radius < 0) {
    throw Error("ecfp radius must be >= 0");
  }
  if (nbits < 1 || (nbits & (nbits - 1)) != 0) {
    throw Error("ecfp nbits must be a power of two");
  }
  Fingerprint fp;
  fp.nbits = nbits;
  fp.radius = radius;
  fp.words.assign(static_cast<std::size_t>(nbits / 64 + (nbits % 64 ? 1 : 0)), 0);

  const auto adj = m.adjacency();
  std::vector<std::uint64_t> env(m.atoms.size());
  for (std::size_t ai = 0; ai < m.atoms.size(); ++ai) {
    const Atom &a = m.atoms[ai];
    std::uint64_t h = 0x243F6A8885A308D3ULL;
    h = mix(h, static_cast<std::uint64_t>(a.element));
    h = mix(h, static_cast<std::uint64_t>(adj[ai].size()));
    h = mix(h, static_cast<std::uint64_t>(a.hcount));
    h = mix(h, static_cast<std::uint64_t>(a.formal_charge + 16));
    h = mix(h, a.in_ring ? 1 : 0);
    env[ai] = h;
  }

  auto set_bit = [&](std::uint64_t h) {
    const int k = static_cast<int>(h & static_cast<std::uint64_t>(nbits - 1));
    fp.words[static_cast<std::size_t>(k >> 6)] |= 1ULL << (k & 63);
  };

  for (std::uint64_t h : env) {
    set_bit(h);
  }
  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next(env.size());
    for (std::size_t ai = 0; ai < m.atoms.size(); ++ai) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> nbrs;
      nbrs.reserve(adj[ai].size());
      for (const auto &[v, bi] : adj[ai]) {
        nbrs.emplace_back(
            static_cast<std::uint64_t>(m.bonds[static_cast<std::size_t>(bi)].order),
            env[static_cast<std::size_t>(v)]);
      }
      std::sort(nbrs.begin(), nbrs.end());
      std::uint64_t h = mix(env[ai], static_cast<std::uint64_t>(r));
      for (const auto &[o, nh] : nbrs) {
        h = mix(h, o);
        h = mix(h, nh);
      }
      next[ai] = h;
      set_bit(h);
    }
    env = std::move(next);
  }
  return fp;
}

double tanimoto(const Fingerprint &a, const Fingerprint &b) {
  if (a.nbits != b.nbits) {
    throw Error("tanimoto on fingerprints of different sizes");
  }
  int inter = 0;
  int uni = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w) {
    inter += std::popcount(a.words[w] & b.words[w]);
    uni += std::popcount(a.words[w] | b.words[w]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// MCES
// ---------------------------------------------------------------------------

namespace {

struct EdgeLabel {
  int order;
  int el_lo;
  int el_hi;  // endpoint elements, sorted

  bool operator==(const EdgeLabel &o) const {
    return order == o.order && el_lo == o.el_lo && el_hi == o.el_hi;
  }
};

EdgeLabel edge_label(const MolGraph &g, const Bond &b) {
  int ea = static_cast<int>(g.atoms[static_cast<std::size_t>(b.a)].element);
  int eb = static_cast<int>(g.atoms[static_cast<std::size_t>(b.b)].element);
  if (ea > eb) {
    std::swap(ea, eb);
  }
  return {static_cast<int>(b.order), ea, eb};
}

struct McesSearch {
  const MolGraph &ga;
  const MolGraph &gb;
  std::vector<EdgeLabel> la, lb;
  std::vector<char> b_used;
  std::vector<int> map_ab;  // atom of a -> atom of b, -1 unassigned
  std::vector<int> map_ba;
  long long budget;
  long long expansions = 0;
  int best = 0;
  bool exact = true;

  McesSearch(const MolGraph &a, const MolGraph &b, long long budget_in)
      : ga(a), gb(b), b_used(b.bonds.size(), 0),
        map_ab(a.atoms.size(), -1), map_ba(b.atoms.size(), -1),
        budget(budget_in) {
    la.reserve(a.bonds.size());
    for (const auto &e : a.bonds) {
      la.push_back(edge_label(a, e));
    }
    lb.reserve(b.bonds.size());
    for (const auto &e : b.bonds) {
      lb.push_back(edge_label(b, e));
    }
  }

  bool try_assign(int atom_a, int atom_b, std::vector<std::pair<int, int>> &undo) {
    const int cur = map_ab[static_cast<std::size_t>(atom_a)];
    if (cur == atom_b) {
      return true;
    }
    if (cur != -1 || map_ba[static_cast<std::size_t>(atom_b)] != -1) {
      return false;
    }
    map_ab[static_cast<std::size_t>(atom_a)] = atom_b;
    map_ba[static_cast<std::size_t>(atom_b)] = atom_a;
    undo.emplace_back(atom_a, atom_b);
    return true;
  }

  void unassign(const std::vector<std::pair<int, int>> &undo) {
    for (const auto &[aa, bb] : undo) {
      map_ab[static_cast<std::size_t>(aa)] = -1;
      map_ba[static_cast<std::size_t>(bb)] = -1;
    }
  }

  void search(std::size_t edge_a, int matched, int b_remaining) {
    if (!exact) {
      return;
    }
    if (++expansions > budget) {
      exact = false;
      return;
    }
    best = std::max(best, matched);
    if (edge_a >= ga.bonds.size()) {
      return;
    }
    const int a_remaining = static_cast<int>(ga.bonds.size() - edge_a);
    if (matched + std::min(a_remaining, b_remaining) <= best) {
      return;
    }

    const Bond &ea = ga.bonds[edge_a];
    for (std::size_t edge_b = 0; edge_b < gb.bonds.size(); ++edge_b) {
      if (b_used[edge_b] || !(la[edge_a] == lb[edge_b])) {
        continue;
      }
      const Bond &eb = gb.bonds[edge_b];
      for (int orient = 0; orient < 2; ++orient) {
        const int b1 = orient == 0 ? eb.a : eb.b;
        const int b2 = orient == 0 ? eb.b : eb.a;
        std::vector<std::pair<int, int>> undo;
        if (try_assign(ea.a, b1, undo) && try_assign(ea.b, b2, undo)) {
          b_used[edge_b] = 1;
          search(edge_a + 1, matched + 1, b_remaining - 1);
          b_used[edge_b] = 0;
        }
        unassign(undo);
        // Symmetric edges need only one orientation.
        if (eb.a == eb.b) {
          break;
        }
      }
    }
    // Skip this edge of a.
    search(edge_a + 1, matched, b_remaining);
  }
};

}  // namespace

MCESResult mces_distance(const MolGraph &a, const MolGraph &b, long long budget) {
  McesSearch s(a, b, budget);
  s.search(0, 0, static_cast<int>(b.bonds.size()));
  MCESResult r;
  r.common_edges = s.best;
  r.exact = s.exact;
  r.distance = static_cast<int>(a.bonds.size() + b.bonds.size()) - 2 * s.best;
  return r;
}

int rotatable_bond_count(const MolGraph &m) {
  std::vector<int> degree(m.atoms.size(), 0);
  for (const auto &b : m.bonds) {
    ++degree[static_cast<std::size_t>(b.a)];
    ++degree[static_cast<std::size_t>(b.b)];
  }
  int n = 0;
  for (const auto &b : m.bonds) {
    if (b.order == BondOrder::Single && !b.in_ring &&
        degree[static_cast<std::size_t>(b.a)] >= 2 &&
        degree[static_cast<std::size_t>(b.b)] >= 2) {
      ++n;
    }
  }
  return n;
}

}  // namespace safeflow
