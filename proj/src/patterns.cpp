//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/patterns.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace safeflow {

namespace {

constexpr int kMaxPatternAtoms = 12;

struct PendingBond {
  int order = -1;          // -1 = unspecified (resolved by aromaticity)
  bool any = false;        // '~'
  bool require_ring = false;
  bool present = false;
};

class PatternBuilder {
 public:
  explicit PatternBuilder(std::string name) { pattern_.name = std::move(name); }

  void add_atom(PatternAtom atom, std::size_t pos) {
    const int idx = static_cast<int>(pattern_.atoms.size());
    if (idx >= kMaxPatternAtoms) {
      throw ParseError("pattern exceeds " + std::to_string(kMaxPatternAtoms) + " atoms", pos);
    }
    pattern_.atoms.push_back(atom);
    if (prev_ >= 0) {
      add_bond(prev_, idx, pos);
    }
    prev_ = idx;
  }

  void bond_char(char c, std::size_t pos) {
    if (pending_.present && c != '@') {
      throw ParseError("two consecutive bond symbols in pattern", pos);
    }
    pending_.present = true;
    switch (c) {
      case '-': pending_.order = static_cast<int>(BondOrder::Single); break;
      case '=': pending_.order = static_cast<int>(BondOrder::Double); break;
      case '#': pending_.order = static_cast<int>(BondOrder::Triple); break;
      case ':': pending_.order = static_cast<int>(BondOrder::Aromatic); break;
      case '~': pending_.any = true; break;
      case '@': pending_.require_ring = true; break;
      default: throw ParseError("bad pattern bond symbol", pos);
    }
  }

  void open_branch(std::size_t pos) {
    if (prev_ < 0) {
      throw ParseError("branch with no preceding pattern atom", pos);
    }
    stack_.push_back(prev_);
  }

  void close_branch(std::size_t pos) {
    if (stack_.empty()) {
      throw ParseError("unmatched ')' in pattern", pos);
    }
    prev_ = stack_.back();
    stack_.pop_back();
  }

  void ring_digit(int d, std::size_t pos) {
    if (prev_ < 0) {
      throw ParseError("ring digit with no preceding pattern atom", pos);
    }
    auto it = open_.find(d);
    if (it == open_.end()) {
      open_[d] = {prev_, pending_};
      pending_ = {};
      return;
    }
    const auto [atom, opened_pending] = it->second;
    open_.erase(it);
    PendingBond use = opened_pending.present ? opened_pending : pending_;
    pending_ = {};
    finish_bond(atom, prev_, use, pos);
  }

  PatternGraph finish(std::size_t end) {
    if (pattern_.atoms.empty()) {
      throw ParseError("empty pattern", 0);
    }
    if (!stack_.empty()) {
      throw ParseError("unmatched '(' in pattern", end);
    }
    if (!open_.empty()) {
      throw ParseError("unmatched ring digit in pattern", end);
    }
    if (pending_.present) {
      throw ParseError("dangling bond in pattern", end);
    }
    return pattern_;
  }

 private:
  void add_bond(int a, int b, std::size_t pos) {
    finish_bond(a, b, pending_, pos);
    pending_ = {};
  }

  void finish_bond(int a, int b, const PendingBond &pb, std::size_t pos) {
    PatternBond bond;
    bond.a = a;
    bond.b = b;
    bond.require_ring = pb.require_ring;
    if (pb.any) {
      bond.order = -1;
    } else if (pb.order >= 0) {
      bond.order = pb.order;
    } else {
      // Unspecified order: aromatic between two aromatic-required atoms.
      const bool both_arom =
          pattern_.atoms[static_cast<std::size_t>(a)].aromatic == AromMode::Aromatic &&
          pattern_.atoms[static_cast<std::size_t>(b)].aromatic == AromMode::Aromatic;
      bond.order = static_cast<int>(both_arom ? BondOrder::Aromatic : BondOrder::Single);
    }
    if (a == b) {
      throw ParseError("pattern bond endpoints coincide", pos);
    }
    pattern_.bonds.push_back(bond);
  }

  PatternGraph pattern_;
  std::vector<int> stack_;
  std::map<int, std::pair<int, PendingBond>> open_;
  int prev_ = -1;
  PendingBond pending_;
};

PatternAtom bracket_pattern_atom(std::string_view s, std::size_t &i) {
  const std::size_t start = i;
  ++i;
  PatternAtom atom;
  if (i >= s.size()) {
    throw ParseError("unterminated pattern bracket", start);
  }
  if (s[i] == 'X') {
    atom.element = std::nullopt;
    atom.aromatic = AromMode::Any;
    ++i;
  } else if (std::isupper(static_cast<unsigned char>(s[i]))) {
    std::string sym(1, s[i]);
    if (i + 1 < s.size() && std::islower(static_cast<unsigned char>(s[i + 1]))) {
      const std::string two = sym + s[i + 1];
      if (element_from_symbol(two)) {
        sym = two;
        ++i;
      }
    }
    const auto el = element_from_symbol(sym);
    if (!el) {
      throw ParseError("unknown element in pattern bracket", start + 1);
    }
    atom.element = *el;
    atom.aromatic = AromMode::NonAromatic;
    ++i;
  } else if (std::islower(static_cast<unsigned char>(s[i]))) {
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(s[i])));
    const auto el = element_from_symbol(std::string_view(&up, 1));
    if (!el) {
      throw ParseError("unknown aromatic element in pattern bracket", i);
    }
    atom.element = *el;
    atom.aromatic = AromMode::Aromatic;
    ++i;
  } else {
    throw ParseError("expected element in pattern bracket", i);
  }

  if (i < s.size() && s[i] == 'H') {
    ++i;
    int h = 1;
    if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      h = s[i] - '0';
      ++i;
    }
    atom.min_hydrogens = h;
  }
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    const int sign = s[i] == '+' ? 1 : -1;
    ++i;
    int mag = 1;
    if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      mag = s[i] - '0';
      ++i;
    }
    atom.charge = sign * mag;
  }
  if (i >= s.size() || s[i] != ']') {
    throw ParseError("expected ']' in pattern bracket", i < s.size() ? i : s.size());
  }
  ++i;
  return atom;
}

}  // namespace

PatternGraph parse_pattern(std::string name, std::string_view text) {
  PatternBuilder builder(std::move(name));
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '(') {
      builder.open_branch(i);
      ++i;
    } else if (c == ')') {
      builder.close_branch(i);
      ++i;
    } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '~' || c == '@') {
      builder.bond_char(c, i);
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      builder.ring_digit(c - '0', i);
      ++i;
    } else if (c == '[') {
      const std::size_t pos = i;
      builder.add_atom(bracket_pattern_atom(text, i), pos);
    } else if (c == 'X') {
      PatternAtom atom;
      atom.element = std::nullopt;
      atom.aromatic = AromMode::Any;
      builder.add_atom(atom, i);
      ++i;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      if (i + 1 < text.size() && std::islower(static_cast<unsigned char>(text[i + 1]))) {
        const std::string two = sym + text[i + 1];
        if (element_from_symbol(two)) {
          sym = two;
        }
      }
      const auto el = element_from_symbol(sym);
      if (!el) {
        throw ParseError("unknown element in pattern", i);
      }
      PatternAtom atom;
      atom.element = *el;
      atom.aromatic = AromMode::NonAromatic;
      builder.add_atom(atom, i);
      i += sym.size();
    } else if (std::islower(static_cast<unsigned char>(c))) {
      const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      const auto el = element_from_symbol(std::string_view(&up, 1));
      if (!el || !element_can_be_aromatic(*el)) {
        throw ParseError("unknown aromatic symbol in pattern", i);
      }
      PatternAtom atom;
      atom.element = *el;
      atom.aromatic = AromMode::Aromatic;
      builder.add_atom(atom, i);
      ++i;
    } else {
      throw ParseError("unexpected character in pattern", i);
    }
  }
  return builder.finish(text.size());
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

namespace {

bool atom_compatible(const Atom &t, const PatternAtom &p) {
  if (p.element && t.element != *p.element) {
    return false;
  }
  if (p.aromatic == AromMode::Aromatic && !t.aromatic) {
    return false;
  }
  if (p.aromatic == AromMode::NonAromatic && t.aromatic) {
    return false;
  }
  if (p.charge && t.formal_charge != *p.charge) {
    return false;
  }
  return t.hcount >= p.min_hydrogens;
}

bool bond_compatible(const Bond &t, const PatternBond &p) {
  if (p.order >= 0 && static_cast<int>(t.order) != p.order) {
    return false;
  }
  return !p.require_ring || t.in_ring;
}

struct Matcher {
  const MolGraph &m;
  const PatternGraph &p;
  std::vector<std::vector<std::pair<int, int>>> madj;
  std::vector<std::vector<std::pair<int, int>>> padj;  // (atom, bond)
  std::vector<int> order;        // pattern atoms in DFS preorder
  std::vector<int> anchor;       // earlier pattern neighbor per order slot
  std::vector<int> anchor_bond;  // pattern bond to the anchor
  std::vector<int> assign;       // pattern atom -> target atom
  std::vector<char> used;        // target atoms in use

  Matcher(const MolGraph &mol, const PatternGraph &pat)
      : m(mol), p(pat), madj(mol.adjacency()),
        padj(pat.atoms.size()),
        assign(pat.atoms.size(), -1), used(mol.atoms.size(), 0) {
    for (int bi = 0; bi < static_cast<int>(p.bonds.size()); ++bi) {
      const auto &b = p.bonds[static_cast<std::size_t>(bi)];
      padj[static_cast<std::size_t>(b.a)].emplace_back(b.b, bi);
      padj[static_cast<std::size_t>(b.b)].emplace_back(b.a, bi);
    }
    // DFS preorder from atom 0; patterns are connected, so every later
    // atom has an anchor among the already-placed ones.
    std::vector<char> seen(p.atoms.size(), 0);
    std::vector<std::pair<int, std::pair<int, int>>> stack = {{0, {-1, -1}}};
    while (!stack.empty()) {
      const auto [u, via] = stack.back();
      stack.pop_back();
      if (seen[static_cast<std::size_t>(u)]) {
        continue;
      }
      seen[static_cast<std::size_t>(u)] = 1;
      order.push_back(u);
      anchor.push_back(via.first);
      anchor_bond.push_back(via.second);
      for (const auto &[v, bi] : padj[static_cast<std::size_t>(u)]) {
        if (!seen[static_cast<std::size_t>(v)]) {
          stack.push_back({v, {u, bi}});
        }
      }
    }
  }

  bool extend(std::size_t slot) {
    if (slot >= order.size()) {
      return true;
    }
    const int pu = order[slot];
    const PatternAtom &pa = p.atoms[static_cast<std::size_t>(pu)];

    auto try_target = [&](int tu) -> bool {
      if (used[static_cast<std::size_t>(tu)] ||
          !atom_compatible(m.atoms[static_cast<std::size_t>(tu)], pa)) {
        return false;
      }
      // Every pattern bond from pu into the placed set must exist in m.
      for (const auto &[pv, pbi] : padj[static_cast<std::size_t>(pu)]) {
        const int tv = assign[static_cast<std::size_t>(pv)];
        if (tv < 0) {
          continue;
        }
        bool found = false;
        for (const auto &[nbr, tbi] : madj[static_cast<std::size_t>(tu)]) {
          if (nbr == tv &&
              bond_compatible(m.bonds[static_cast<std::size_t>(tbi)],
                              p.bonds[static_cast<std::size_t>(pbi)])) {
            found = true;
            break;
          }
        }
        if (!found) {
          return false;
        }
      }
      assign[static_cast<std::size_t>(pu)] = tu;
      used[static_cast<std::size_t>(tu)] = 1;
      if (extend(slot + 1)) {
        return true;
      }
      assign[static_cast<std::size_t>(pu)] = -1;
      used[static_cast<std::size_t>(tu)] = 0;
      return false;
    };

    if (anchor[slot] < 0) {
      for (int tu = 0; tu < static_cast<int>(m.atoms.size()); ++tu) {
        if (try_target(tu)) {
          return true;
        }
      }
      return false;
    }
    const int ta = assign[static_cast<std::size_t>(anchor[slot])];
    for (const auto &[tu, tbi] : madj[static_cast<std::size_t>(ta)]) {
      (void)tbi;
      if (try_target(tu)) {
        return true;
      }
    }
    return false;
  }
};

// Aromatic rings sharing at least one bond: some connected component of
// the aromatic ring-bond subgraph carries two or more independent cycles.
bool has_fused_aromatic_rings(const MolGraph &m) {
  std::vector<int> comp(m.atoms.size(), -1);
  std::vector<std::vector<int>> comp_atoms;
  std::vector<int> comp_edges;
  auto aromatic_ring_bond = [&](const Bond &b) {
    return b.order == BondOrder::Aromatic && b.in_ring;
  };

  std::vector<std::vector<int>> adj(m.atoms.size());
  for (const auto &b : m.bonds) {
    if (aromatic_ring_bond(b)) {
      adj[static_cast<std::size_t>(b.a)].push_back(b.b);
      adj[static_cast<std::size_t>(b.b)].push_back(b.a);
    }
  }
  for (std::size_t root = 0; root < m.atoms.size(); ++root) {
    if (comp[root] >= 0 || adj[root].empty()) {
      continue;
    }
    const int c = static_cast<int>(comp_atoms.size());
    comp_atoms.emplace_back();
    comp_edges.push_back(0);
    std::vector<int> stack = {static_cast<int>(root)};
    comp[root] = c;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      comp_atoms[static_cast<std::size_t>(c)].push_back(u);
      for (int v : adj[static_cast<std::size_t>(u)]) {
        if (comp[static_cast<std::size_t>(v)] < 0) {
          comp[static_cast<std::size_t>(v)] = c;
          stack.push_back(v);
        }
      }
    }
  }
  for (const auto &b : m.bonds) {
    if (aromatic_ring_bond(b)) {
      ++comp_edges[static_cast<std::size_t>(comp[static_cast<std::size_t>(b.a)])];
    }
  }
  for (std::size_t c = 0; c < comp_atoms.size(); ++c) {
    const int cycles = comp_edges[c] - static_cast<int>(comp_atoms[c].size()) + 1;
    if (cycles >= 2) {
      return true;
    }
  }
  return false;
}

bool has_heteroaromatic_ring(const MolGraph &m) {
  for (const auto &a : m.atoms) {
    if (a.aromatic && a.in_ring && a.element != Element::C) {
      return true;
    }
  }
  return false;
}

}  // namespace

bool matches_pattern(const MolGraph &m, const PatternGraph &p) {
  if (p.atoms.empty() || m.atoms.size() < p.atoms.size()) {
    return false;
  }
  Matcher matcher(m, p);
  return matcher.extend(0);
}

bool PatternTable::knows(std::string_view name) const {
  return std::find(group_names.begin(), group_names.end(), name) != group_names.end();
}

PatternTable parse_pattern_table(std::string_view text) {
  PatternTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    std::istringstream fields(line);
    std::string name;
    std::string pattern_text;
    if (!(fields >> name >> pattern_text)) {
      throw DataError("bad pattern line " + std::to_string(lineno) + ": " + line);
    }
    table.patterns.push_back(parse_pattern(name, pattern_text));
    if (!table.knows(name)) {
      table.group_names.push_back(name);
    }
  }
  for (const char *proc : {kHeteroaromatic, kPolycyclicAromatic}) {
    if (!table.knows(proc)) {
      table.group_names.push_back(proc);
    }
  }
  return table;
}

PatternTable load_patterns(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open pattern file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_pattern_table(buf.str());
}

std::set<std::string> functional_groups(const MolGraph &m, const PatternTable &table) {
  std::set<std::string> out;
  for (const auto &p : table.patterns) {
    if (out.count(p.name)) {
      continue;
    }
    if (matches_pattern(m, p)) {
      out.insert(p.name);
    }
  }
  if (has_heteroaromatic_ring(m)) {
    out.insert(kHeteroaromatic);
  }
  if (has_fused_aromatic_rings(m)) {
    out.insert(kPolycyclicAromatic);
  }
  return out;
}

FgScores fg_scores(const std::set<std::string> &truth,
                   const std::set<std::string> &pred,
                   const PatternTable &table) {
  for (const auto &s : truth) {
    if (!table.knows(s)) {
      throw DataError("unknown functional group: " + s);
    }
  }
  for (const auto &s : pred) {
    if (!table.knows(s)) {
      throw DataError("unknown functional group: " + s);
    }
  }
  if (truth.empty() && pred.empty()) {
    return {1.0, 1.0, 1.0};
  }
  int tp = 0;
  for (const auto &s : truth) {
    tp += pred.count(s) ? 1 : 0;
  }
  const int fp = static_cast<int>(pred.size()) - tp;
  const int fn = static_cast<int>(truth.size()) - tp;
  FgScores s;
  s.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  s.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

}  // namespace safeflow
