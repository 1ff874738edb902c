//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/molgraph.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

namespace safeflow {

namespace {

struct ElementInfo {
  Element element;
  const char *symbol;
  bool organic_subset;
  bool aromatic_ok;
};

constexpr std::array<ElementInfo, 10> kElements = {{
    {Element::B, "B", true, true},
    {Element::C, "C", true, true},
    {Element::N, "N", true, true},
    {Element::O, "O", true, true},
    {Element::P, "P", true, true},
    {Element::S, "S", true, true},
    {Element::F, "F", true, false},
    {Element::Cl, "Cl", true, false},
    {Element::Br, "Br", true, false},
    {Element::I, "I", true, false},
}};

const ElementInfo &info(Element e) {
  return kElements[static_cast<std::size_t>(e)];
}

}  // namespace

const char *element_symbol(Element e) { return info(e).symbol; }

std::optional<Element> element_from_symbol(std::string_view s) {
  for (const auto &ei : kElements) {
    if (s == ei.symbol) {
      return ei.element;
    }
  }
  return std::nullopt;
}

bool element_can_be_aromatic(Element e) { return info(e).aromatic_ok; }

std::vector<int> allowed_valences(Element e, int charge) {
  if (charge == 0) {
    switch (e) {
      case Element::B: return {3};
      case Element::C: return {4};
      case Element::N: return {3, 5};
      case Element::O: return {2};
      case Element::P: return {3, 5};
      case Element::S: return {2, 4, 6};
      case Element::F:
      case Element::Cl:
      case Element::Br:
      case Element::I: return {1};
    }
  }
  if (charge == 1) {
    switch (e) {
      case Element::B: return {2};
      case Element::C: return {3};
      case Element::N: return {4};
      case Element::O: return {3};
      case Element::P: return {4};
      case Element::S: return {3, 5};
      default: return {};
    }
  }
  if (charge == -1) {
    switch (e) {
      case Element::B: return {4};
      case Element::C: return {3};
      case Element::N: return {2};
      case Element::O: return {1};
      case Element::P: return {2};
      case Element::S: return {1};
      case Element::F:
      case Element::Cl:
      case Element::Br:
      case Element::I: return {0};
    }
  }
  if (charge == 2 && e == Element::S) {
    return {4};
  }
  return {};
}

int bond_order_int(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 1;
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    case BondOrder::Aromatic: return 1;
  }
  return 1;
}

std::vector<std::vector<std::pair<int, int>>> MolGraph::adjacency() const {
  std::vector<std::vector<std::pair<int, int>>> adj(atoms.size());
  for (int bi = 0; bi < static_cast<int>(bonds.size()); ++bi) {
    adj[static_cast<std::size_t>(bonds[bi].a)].emplace_back(bonds[bi].b, bi);
    adj[static_cast<std::size_t>(bonds[bi].b)].emplace_back(bonds[bi].a, bi);
  }
  return adj;
}

int MolGraph::degree(int atom) const {
  int d = 0;
  for (const auto &b : bonds) {
    if (b.a == atom || b.b == atom) {
      ++d;
    }
  }
  return d;
}

int MolGraph::component_count() const {
  const auto adj = adjacency();
  std::vector<char> seen(atoms.size(), 0);
  int count = 0;
  for (std::size_t root = 0; root < atoms.size(); ++root) {
    if (seen[root]) {
      continue;
    }
    ++count;
    std::vector<int> stack = {static_cast<int>(root)};
    seen[root] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto &[v, bi] : adj[static_cast<std::size_t>(u)]) {
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          stack.push_back(v);
        }
      }
    }
  }
  return count;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

constexpr int kNoAtom = -1;
constexpr int kNoBondChar = 0;

struct PendingRing {
  int atom;
  char bond_char;  // kNoBondChar when unspecified
  std::size_t position;
};

struct ParsedAtom {
  Atom atom;
  bool bracket = false;
  int explicit_h = 0;  // only meaningful for bracket atoms
};

class SmilesBuilder {
 public:
  explicit SmilesBuilder(std::string_view text) : text_(text) { }

  void add_atom(const ParsedAtom &pa, std::size_t pos) {
    const int idx = static_cast<int>(atoms_.size());
    atoms_.push_back(pa);
    if (prev_ != kNoAtom) {
      make_bond(prev_, idx, take_pending(), pos);
    } else if (pending_bond_ != kNoBondChar) {
      throw ParseError("bond symbol with no preceding atom", pos);
    }
    prev_ = idx;
  }

  void set_pending_bond(char c, std::size_t pos) {
    if (pending_bond_ != kNoBondChar) {
      throw ParseError("two consecutive bond symbols", pos);
    }
    if (prev_ == kNoAtom) {
      throw ParseError("bond symbol with no preceding atom", pos);
    }
    pending_bond_ = c;
  }

  void open_branch(std::size_t pos) {
    if (prev_ == kNoAtom) {
      throw ParseError("branch with no preceding atom", pos);
    }
    if (pending_bond_ != kNoBondChar) {
      throw ParseError("bond symbol before '('", pos);
    }
    branch_stack_.push_back({prev_, pos});
  }

  void close_branch(std::size_t pos) {
    if (branch_stack_.empty()) {
      throw ParseError("unmatched ')'", pos);
    }
    if (pending_bond_ != kNoBondChar) {
      throw ParseError("dangling bond before ')'", pos);
    }
    prev_ = branch_stack_.back().first;
    branch_stack_.pop_back();
  }

  void dot(std::size_t pos) {
    if (prev_ == kNoAtom) {
      throw ParseError("'.' with no preceding atom", pos);
    }
    if (pending_bond_ != kNoBondChar) {
      throw ParseError("bond symbol before '.'", pos);
    }
    if (!branch_stack_.empty()) {
      throw ParseError("'.' inside a branch", pos);
    }
    prev_ = kNoAtom;
  }

  void ring_digit(int digit, std::size_t pos) {
    if (prev_ == kNoAtom) {
      throw ParseError("ring closure with no preceding atom", pos);
    }
    const char bc = take_pending();
    auto it = open_rings_.find(digit);
    if (it == open_rings_.end()) {
      open_rings_[digit] = PendingRing{prev_, bc, pos};
      return;
    }
    const PendingRing open = it->second;
    open_rings_.erase(it);
    char use = kNoBondChar;
    if (open.bond_char != kNoBondChar && bc != kNoBondChar &&
        open.bond_char != bc) {
      throw ParseError("conflicting bond orders on ring closure", pos);
    }
    use = open.bond_char != kNoBondChar ? open.bond_char : bc;
    make_bond(open.atom, prev_, use, pos);
  }

  void finish(std::size_t end_pos) {
    if (atoms_.empty()) {
      throw ParseError("empty SMILES", 0);
    }
    if (pending_bond_ != kNoBondChar) {
      throw ParseError("dangling bond at end of input", end_pos);
    }
    if (!branch_stack_.empty()) {
      throw ParseError("unmatched '('", branch_stack_.back().second);
    }
    if (!open_rings_.empty()) {
      throw ParseError("unmatched ring closure", open_rings_.begin()->second.position);
    }
  }

  MolGraph finalize();

 private:
  char take_pending() {
    const char c = pending_bond_;
    pending_bond_ = kNoBondChar;
    return c;
  }

  void make_bond(int a, int b, char bond_char, std::size_t pos) {
    if (a == b) {
      throw ParseError("bond endpoints are the same atom", pos);
    }
    for (const auto &existing : bonds_) {
      if ((existing.a == a && existing.b == b) ||
          (existing.a == b && existing.b == a)) {
        throw ParseError("duplicate bond between atoms", pos);
      }
    }
    BondOrder order;
    const bool both_aromatic =
        atoms_[static_cast<std::size_t>(a)].atom.aromatic &&
        atoms_[static_cast<std::size_t>(b)].atom.aromatic;
    switch (bond_char) {
      case kNoBondChar: order = both_aromatic ? BondOrder::Aromatic : BondOrder::Single; break;
      case '-':
      case '/':
      case '\\': order = BondOrder::Single; break;
      case '=': order = BondOrder::Double; break;
      case '#': order = BondOrder::Triple; break;
      case ':': order = BondOrder::Aromatic; break;
      default: throw ParseError("unsupported bond symbol", pos);
    }
    if (order == BondOrder::Aromatic && !both_aromatic) {
      throw ParseError("aromatic bond between non-aromatic atoms", pos);
    }
    bonds_.push_back({a, b, order, false});
  }

  std::string_view text_;
  std::vector<ParsedAtom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::pair<int, std::size_t>> branch_stack_;
  std::map<int, PendingRing> open_rings_;
  int prev_ = kNoAtom;
  char pending_bond_ = kNoBondChar;
};

// Marks in_ring on bonds and atoms via fundamental cycles of a BFS forest.
void perceive_rings(MolGraph &m) {
  const auto adj = m.adjacency();
  const int n = static_cast<int>(m.atoms.size());
  std::vector<int> parent_atom(static_cast<std::size_t>(n), -1);
  std::vector<int> parent_bond(static_cast<std::size_t>(n), -1);
  std::vector<int> depth(static_cast<std::size_t>(n), -1);
  std::vector<char> bond_is_tree(m.bonds.size(), 0);

  for (int root = 0; root < n; ++root) {
    if (depth[static_cast<std::size_t>(root)] >= 0) {
      continue;
    }
    depth[static_cast<std::size_t>(root)] = 0;
    std::vector<int> queue = {root};
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const int u = queue[qi];
      for (const auto &[v, bi] : adj[static_cast<std::size_t>(u)]) {
        if (depth[static_cast<std::size_t>(v)] < 0) {
          depth[static_cast<std::size_t>(v)] = depth[static_cast<std::size_t>(u)] + 1;
          parent_atom[static_cast<std::size_t>(v)] = u;
          parent_bond[static_cast<std::size_t>(v)] = bi;
          bond_is_tree[static_cast<std::size_t>(bi)] = 1;
          queue.push_back(v);
        }
      }
    }
  }

  // Each non-tree edge closes one cycle: walk both endpoints up to their
  // lowest common ancestor, flagging every bond on the way.
  for (int bi = 0; bi < static_cast<int>(m.bonds.size()); ++bi) {
    if (bond_is_tree[static_cast<std::size_t>(bi)]) {
      continue;
    }
    m.bonds[static_cast<std::size_t>(bi)].in_ring = true;
    int u = m.bonds[static_cast<std::size_t>(bi)].a;
    int v = m.bonds[static_cast<std::size_t>(bi)].b;
    while (u != v) {
      int &deeper = depth[static_cast<std::size_t>(u)] >= depth[static_cast<std::size_t>(v)] ? u : v;
      const int pb = parent_bond[static_cast<std::size_t>(deeper)];
      m.bonds[static_cast<std::size_t>(pb)].in_ring = true;
      deeper = parent_atom[static_cast<std::size_t>(deeper)];
    }
  }

  for (const auto &b : m.bonds) {
    if (b.in_ring) {
      m.atoms[static_cast<std::size_t>(b.a)].in_ring = true;
      m.atoms[static_cast<std::size_t>(b.b)].in_ring = true;
    }
  }
}

// The hydrogen count an unbracketed symbol would get from the parser,
// given the atom's full bond environment.
int default_hydrogens(const Atom &atom, int arom_bonds, int plain_order_sum) {
  if (atom.aromatic) {
    // Lowercase ring atoms: carbon (and boron) fill to the default
    // valence counting aromatic bonds as 1.5; other heteroatoms carry
    // no hydrogens unless bracketed.
    if (atom.element == Element::C || atom.element == Element::B) {
      const int base = atom.element == Element::C ? 4 : 3;
      const int sum = plain_order_sum + (3 * arom_bonds) / 2;
      return std::max(0, base - sum);
    }
    return 0;
  }
  const int sum = plain_order_sum;
  for (int v : allowed_valences(atom.element, 0)) {
    if (v >= sum) {
      return v - sum;
    }
  }
  return -1;  // exceeds every allowed valence
}

void resolve_hydrogens_and_validate(MolGraph &m,
                                    const std::vector<ParsedAtom> &parsed) {
  const auto adj = m.adjacency();
  for (int ai = 0; ai < static_cast<int>(m.atoms.size()); ++ai) {
    Atom &atom = m.atoms[static_cast<std::size_t>(ai)];
    int arom_bonds = 0;
    int plain_sum = 0;
    for (const auto &[nbr, bi] : adj[static_cast<std::size_t>(ai)]) {
      const BondOrder o = m.bonds[static_cast<std::size_t>(bi)].order;
      if (o == BondOrder::Aromatic) {
        ++arom_bonds;
      } else {
        plain_sum += bond_order_int(o);
      }
    }
    if (atom.aromatic && arom_bonds > 0 && !atom.in_ring) {
      throw Error(std::string("aromatic atom outside a ring: atom ") +
                  std::to_string(ai));
    }

    if (parsed[static_cast<std::size_t>(ai)].bracket) {
      atom.hcount = parsed[static_cast<std::size_t>(ai)].explicit_h;
    } else {
      const int h = default_hydrogens(atom, arom_bonds, plain_sum);
      if (h < 0) {
        throw Error(std::string("valence violation at atom ") +
                    std::to_string(ai) + " (" + element_symbol(atom.element) + ")");
      }
      atom.hcount = h;
    }

    // Total valence check. Aromatic bonds contribute at least one unit and
    // at most one extra double bond across the whole aromatic system, so an
    // atom with aromatic bonds may sit one below an accepted valence.
    const int base = plain_sum + arom_bonds + atom.hcount;
    const auto accepted = allowed_valences(atom.element, atom.formal_charge);
    if (accepted.empty()) {
      throw Error(std::string("unsupported charge ") +
                  std::to_string(atom.formal_charge) + " on " +
                  element_symbol(atom.element));
    }
    bool ok = false;
    for (int v : accepted) {
      if (arom_bonds > 0 ? (base <= v && v <= base + 1) : (base == v)) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw Error(std::string("valence violation at atom ") +
                  std::to_string(ai) + " (" + element_symbol(atom.element) +
                  ", valence " + std::to_string(base) + ")");
    }
  }

  // Aromatic atoms must sit in a ring even when every incident bond was
  // written as single/double (e.g. a stray lowercase atom).
  for (int ai = 0; ai < static_cast<int>(m.atoms.size()); ++ai) {
    const Atom &atom = m.atoms[static_cast<std::size_t>(ai)];
    if (atom.aromatic && !atom.in_ring) {
      throw Error(std::string("aromatic atom outside a ring: atom ") +
                  std::to_string(ai));
    }
  }
  for (const auto &b : m.bonds) {
    if (b.order == BondOrder::Aromatic && !b.in_ring) {
      throw Error("aromatic bond outside a ring");
    }
  }
}

MolGraph finalize_graph(std::vector<ParsedAtom> parsed, std::vector<Bond> bonds) {
  MolGraph m;
  m.atoms.reserve(parsed.size());
  for (const auto &pa : parsed) {
    m.atoms.push_back(pa.atom);
  }
  m.bonds = std::move(bonds);
  perceive_rings(m);
  resolve_hydrogens_and_validate(m, parsed);
  return m;
}

MolGraph SmilesBuilder::finalize() {
  return finalize_graph(std::move(atoms_), std::move(bonds_));
}

ParsedAtom parse_bracket_atom(std::string_view s, std::size_t &i) {
  const std::size_t start = i;
  ++i;  // consume '['
  if (i >= s.size()) {
    throw ParseError("unterminated bracket atom", start);
  }
  if (std::isdigit(static_cast<unsigned char>(s[i]))) {
    throw ParseError("isotopes are not supported", i);
  }
  if (s[i] == '*') {
    throw ParseError("wildcard atoms are not supported", i);
  }

  ParsedAtom pa;
  pa.bracket = true;

  // Element symbol: uppercase (one or two letters) or aromatic lowercase.
  if (std::isupper(static_cast<unsigned char>(s[i]))) {
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
      throw ParseError("unknown element '" + sym + "'", start + 1);
    }
    pa.atom.element = *el;
    ++i;
  } else if (std::islower(static_cast<unsigned char>(s[i]))) {
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(s[i])));
    const auto el = element_from_symbol(std::string_view(&up, 1));
    if (!el || !element_can_be_aromatic(*el)) {
      throw ParseError("unknown aromatic element", i);
    }
    pa.atom.element = *el;
    pa.atom.aromatic = true;
    ++i;
  } else {
    throw ParseError("expected element symbol in bracket atom", i);
  }

  // Chirality markers are accepted and discarded.
  while (i < s.size() && s[i] == '@') {
    ++i;
  }

  if (i < s.size() && s[i] == 'H') {
    ++i;
    int h = 1;
    if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      h = s[i] - '0';
      ++i;
    }
    pa.explicit_h = h;
  }

  if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    const int sign = s[i] == '+' ? 1 : -1;
    const char sign_char = s[i];
    ++i;
    int magnitude = 1;
    if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      magnitude = s[i] - '0';
      ++i;
    } else {
      while (i < s.size() && s[i] == sign_char) {
        ++magnitude;
        ++i;
      }
    }
    pa.atom.formal_charge = sign * magnitude;
  }

  if (i >= s.size() || s[i] != ']') {
    throw ParseError("expected ']' in bracket atom", i < s.size() ? i : s.size());
  }
  ++i;
  return pa;
}

}  // namespace

MolGraph parse_smiles(std::string_view s) {
  SmilesBuilder builder(s);
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    switch (c) {
      case '(': builder.open_branch(i); ++i; break;
      case ')': builder.close_branch(i); ++i; break;
      case '-':
      case '=':
      case '#':
      case ':':
      case '/':
      case '\\':
        builder.set_pending_bond(c, i);
        ++i;
        break;
      case '.': builder.dot(i); ++i; break;
      case '%': {
        if (i + 2 >= s.size() ||
            !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
            !std::isdigit(static_cast<unsigned char>(s[i + 2]))) {
          throw ParseError("'%' must be followed by two digits", i);
        }
        const int digit = (s[i + 1] - '0') * 10 + (s[i + 2] - '0');
        builder.ring_digit(digit, i);
        i += 3;
        break;
      }
      case '[': {
        const std::size_t pos = i;
        const ParsedAtom pa = parse_bracket_atom(s, i);
        builder.add_atom(pa, pos);
        break;
      }
      case '*': throw ParseError("wildcard atoms are not supported", i);
      default: {
        if (std::isdigit(static_cast<unsigned char>(c))) {
          builder.ring_digit(c - '0', i);
          ++i;
          break;
        }
        if (std::isupper(static_cast<unsigned char>(c))) {
          std::string sym(1, c);
          if (i + 1 < s.size() && std::islower(static_cast<unsigned char>(s[i + 1]))) {
            const std::string two = sym + s[i + 1];
            if (element_from_symbol(two)) {
              sym = two;
            }
          }
          const auto el = element_from_symbol(sym);
          if (!el) {
            throw ParseError(std::string("unknown element '") + c + "'", i);
          }
          ParsedAtom pa;
          pa.atom.element = *el;
          builder.add_atom(pa, i);
          i += sym.size();
          break;
        }
        if (std::islower(static_cast<unsigned char>(c))) {
          const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
          const auto el = element_from_symbol(std::string_view(&up, 1));
          if (!el || !element_can_be_aromatic(*el)) {
            throw ParseError(std::string("unknown aromatic symbol '") + c + "'", i);
          }
          ParsedAtom pa;
          pa.atom.element = *el;
          pa.atom.aromatic = true;
          builder.add_atom(pa, i);
          ++i;
          break;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", i);
      }
    }
  }
  builder.finish(s.size());
  return builder.finalize();
}

// ---------------------------------------------------------------------------
// Canonical ranks
// ---------------------------------------------------------------------------

namespace {

std::vector<int> dense_ranks(const std::vector<std::string> &keys) {
  std::vector<int> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)];
  });
  std::vector<int> ranks(keys.size(), 0);
  int r = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k > 0 && keys[static_cast<std::size_t>(order[k])] !=
                     keys[static_cast<std::size_t>(order[k - 1])]) {
      ++r;
    }
    ranks[static_cast<std::size_t>(order[k])] = r;
  }
  return ranks;
}

void append_int(std::string &out, int v) {
  out.push_back('|');
  out += std::to_string(v);
}

int class_count(const std::vector<int> &ranks) {
  return ranks.empty() ? 0 : *std::max_element(ranks.begin(), ranks.end()) + 1;
}

// One refinement sweep: neighborhood-extended keys, re-ranked densely.
std::vector<int> refine_once(const MolGraph &m,
                             const std::vector<std::vector<std::pair<int, int>>> &adj,
                             const std::vector<int> &ranks) {
  std::vector<std::string> keys(m.atoms.size());
  for (std::size_t ai = 0; ai < m.atoms.size(); ++ai) {
    std::string key;
    append_int(key, ranks[ai]);
    std::vector<std::pair<int, int>> nbr;
    nbr.reserve(adj[ai].size());
    for (const auto &[v, bi] : adj[ai]) {
      nbr.emplace_back(static_cast<int>(m.bonds[static_cast<std::size_t>(bi)].order),
                       ranks[static_cast<std::size_t>(v)]);
    }
    std::sort(nbr.begin(), nbr.end());
    for (const auto &[o, r] : nbr) {
      append_int(key, o);
      append_int(key, r);
    }
    keys[ai] = std::move(key);
  }
  return dense_ranks(keys);
}

std::vector<int> refine_to_fixpoint(const MolGraph &m,
                                    const std::vector<std::vector<std::pair<int, int>>> &adj,
                                    std::vector<int> ranks) {
  int classes = class_count(ranks);
  while (true) {
    std::vector<int> next = refine_once(m, adj, ranks);
    const int next_classes = class_count(next);
    ranks = std::move(next);
    if (next_classes == classes) {
      return ranks;
    }
    classes = next_classes;
  }
}

}  // namespace

std::vector<int> canonical_ranks(const MolGraph &m) {
  const auto adj = m.adjacency();
  std::vector<std::string> keys(m.atoms.size());
  for (std::size_t ai = 0; ai < m.atoms.size(); ++ai) {
    const Atom &a = m.atoms[ai];
    std::string key;
    append_int(key, static_cast<int>(a.element));
    append_int(key, a.aromatic ? 1 : 0);
    append_int(key, static_cast<int>(adj[ai].size()));
    append_int(key, a.hcount);
    append_int(key, a.formal_charge);
    append_int(key, a.in_ring ? 1 : 0);
    keys[ai] = std::move(key);
  }
  std::vector<int> ranks = refine_to_fixpoint(m, adj, dense_ranks(keys));

  // Symmetry breaking: promote the smallest-index member of the lowest tied
  // class, then re-refine, until every atom has a unique rank. Tied classes
  // that survive refinement are automorphic in chemically sensible graphs,
  // so the resulting string does not depend on the input labeling.
  const int n = static_cast<int>(m.atoms.size());
  while (class_count(ranks) < n) {
    std::vector<int> members_per_class(static_cast<std::size_t>(class_count(ranks)), 0);
    for (int r : ranks) {
      ++members_per_class[static_cast<std::size_t>(r)];
    }
    int target_class = -1;
    for (int c = 0; c < static_cast<int>(members_per_class.size()); ++c) {
      if (members_per_class[static_cast<std::size_t>(c)] > 1) {
        target_class = c;
        break;
      }
    }
    int chosen = -1;
    for (int ai = 0; ai < n; ++ai) {
      if (ranks[static_cast<std::size_t>(ai)] == target_class) {
        chosen = ai;
        break;
      }
    }
    for (auto &r : ranks) {
      r *= 2;
    }
    ranks[static_cast<std::size_t>(chosen)] -= 1;
    std::vector<std::string> rekeys(m.atoms.size());
    for (std::size_t ai = 0; ai < m.atoms.size(); ++ai) {
      std::string key;
      append_int(key, ranks[ai]);
      rekeys[ai] = std::move(key);
    }
    ranks = refine_to_fixpoint(m, adj, dense_ranks(rekeys));
  }
  return ranks;
}

// ---------------------------------------------------------------------------
// Writer
// ---------------------------------------------------------------------------

namespace detail {

namespace {

std::string bond_prefix(const MolGraph &m, const Bond &b) {
  const bool both_aromatic = m.atoms[static_cast<std::size_t>(b.a)].aromatic &&
                             m.atoms[static_cast<std::size_t>(b.b)].aromatic;
  switch (b.order) {
    case BondOrder::Single: return both_aromatic ? "-" : "";
    case BondOrder::Double: return "=";
    case BondOrder::Triple: return "#";
    case BondOrder::Aromatic: return both_aromatic ? "" : ":";
  }
  return "";
}

std::string ring_digit_token(int digit) {
  if (digit < 10) {
    return std::string(1, static_cast<char>('0' + digit));
  }
  if (digit < 100) {
    std::string t = "%";
    t.push_back(static_cast<char>('0' + digit / 10));
    t.push_back(static_cast<char>('0' + digit % 10));
    return t;
  }
  throw Error("ring closure digits exhausted");
}

// Token for one atom, bracketing only when the plain symbol would not
// round-trip the charge/hydrogen state.
std::string atom_token(const MolGraph &hgraph, int ai) {
  const Atom &a = hgraph.atoms[static_cast<std::size_t>(ai)];
  int arom_bonds = 0;
  int plain_sum = 0;
  for (const auto &b : hgraph.bonds) {
    if (b.a != ai && b.b != ai) {
      continue;
    }
    if (b.order == BondOrder::Aromatic) {
      ++arom_bonds;
    } else {
      plain_sum += bond_order_int(b.order);
    }
  }
  std::string sym = element_symbol(a.element);
  if (a.aromatic) {
    for (auto &ch : sym) {
      ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  const bool plain_ok = a.formal_charge == 0 &&
                        default_hydrogens(a, arom_bonds, plain_sum) == a.hcount;
  if (plain_ok) {
    return sym;
  }
  std::string t = "[" + sym;
  if (a.hcount == 1) {
    t += "H";
  } else if (a.hcount > 1) {
    t += "H" + std::to_string(a.hcount);
  }
  if (a.formal_charge != 0) {
    t += a.formal_charge > 0 ? "+" : "-";
    const int mag = std::abs(a.formal_charge);
    if (mag > 1) {
      t += std::to_string(mag);
    }
  }
  t += "]";
  return t;
}

struct ComponentWriter {
  const ComponentWriteSpec &spec;
  const MolGraph &g;
  std::vector<std::vector<std::pair<int, int>>> adj;           // sorted by rank
  std::vector<std::vector<std::pair<int, int>>> tree_children; // per atom
  std::vector<char> atom_visited;
  std::vector<char> bond_used;
  std::vector<std::vector<int>> closure_bonds;  // per atom, discovery order
  std::vector<int> closure_digit;               // per bond, -1 until opened
  std::vector<char> digit_in_use;               // index = digit
  std::string out;

  explicit ComponentWriter(const ComponentWriteSpec &s)
      : spec(s),
        g(*s.graph),
        tree_children(g.atoms.size()),
        atom_visited(g.atoms.size(), 0),
        bond_used(g.bonds.size(), 0),
        closure_bonds(g.atoms.size()),
        closure_digit(g.bonds.size(), -1),
        digit_in_use(100, 0) { }

  void build_adjacency() {
    adj = g.adjacency();
    const auto &ranks = *spec.ranks;
    for (auto &nbrs : adj) {
      std::sort(nbrs.begin(), nbrs.end(), [&](const auto &x, const auto &y) {
        return ranks[static_cast<std::size_t>(x.first)] <
               ranks[static_cast<std::size_t>(y.first)];
      });
    }
  }

  // DFS in rank order; splits bonds into tree edges and ring closures.
  void classify(int u) {
    atom_visited[static_cast<std::size_t>(u)] = 1;
    for (const auto &[v, bi] : adj[static_cast<std::size_t>(u)]) {
      if (bond_used[static_cast<std::size_t>(bi)]) {
        continue;
      }
      bond_used[static_cast<std::size_t>(bi)] = 1;
      if (atom_visited[static_cast<std::size_t>(v)]) {
        closure_bonds[static_cast<std::size_t>(u)].push_back(bi);
        closure_bonds[static_cast<std::size_t>(v)].push_back(bi);
      } else {
        tree_children[static_cast<std::size_t>(u)].emplace_back(v, bi);
        classify(v);
      }
    }
  }

  int allocate_digit() {
    for (int d = spec.first_free_ring_digit; d < static_cast<int>(digit_in_use.size()); ++d) {
      if (!digit_in_use[static_cast<std::size_t>(d)]) {
        digit_in_use[static_cast<std::size_t>(d)] = 1;
        return d;
      }
    }
    throw Error("ring closure digits exhausted");
  }

  void emit_atom(int u) {
    out += atom_token(*spec.hgraph, u);
    for (int bi : closure_bonds[static_cast<std::size_t>(u)]) {
      if (closure_digit[static_cast<std::size_t>(bi)] < 0) {
        const int d = allocate_digit();
        closure_digit[static_cast<std::size_t>(bi)] = d;
        out += bond_prefix(g, g.bonds[static_cast<std::size_t>(bi)]);
        out += ring_digit_token(d);
      } else {
        const int d = closure_digit[static_cast<std::size_t>(bi)];
        digit_in_use[static_cast<std::size_t>(d)] = 0;
        out += ring_digit_token(d);
      }
    }
    if (!spec.attachment_digits.empty()) {
      for (int d : spec.attachment_digits[static_cast<std::size_t>(u)]) {
        out += ring_digit_token(d);
      }
    }
  }

  void emit(int u, int via_bond) {
    if (via_bond >= 0) {
      out += bond_prefix(g, g.bonds[static_cast<std::size_t>(via_bond)]);
    }
    emit_atom(u);
    const auto &children = tree_children[static_cast<std::size_t>(u)];
    for (std::size_t k = 0; k < children.size(); ++k) {
      if (k + 1 < children.size()) {
        out += "(";
        emit(children[k].first, children[k].second);
        out += ")";
      } else {
        emit(children[k].first, children[k].second);
      }
    }
  }
};

}  // namespace

std::string write_component(const ComponentWriteSpec &spec) {
  ComponentWriter w(spec);
  w.build_adjacency();

  // Root: lowest-rank atom of the component.
  const auto &ranks = *spec.ranks;
  int root = spec.component_atoms.front();
  for (int a : spec.component_atoms) {
    if (ranks[static_cast<std::size_t>(a)] < ranks[static_cast<std::size_t>(root)]) {
      root = a;
    }
  }

  w.classify(root);
  w.emit(root, -1);
  return w.out;
}

}  // namespace detail

std::string write_canonical(const MolGraph &m) {
  if (m.atoms.empty()) {
    return "";
  }
  const std::vector<int> ranks = canonical_ranks(m);

  // Split into components.
  const auto adj = m.adjacency();
  std::vector<int> comp(m.atoms.size(), -1);
  int ncomp = 0;
  for (std::size_t root = 0; root < m.atoms.size(); ++root) {
    if (comp[root] >= 0) {
      continue;
    }
    std::vector<int> stack = {static_cast<int>(root)};
    comp[root] = ncomp;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto &[v, bi] : adj[static_cast<std::size_t>(u)]) {
        if (comp[static_cast<std::size_t>(v)] < 0) {
          comp[static_cast<std::size_t>(v)] = ncomp;
          stack.push_back(v);
        }
      }
    }
    ++ncomp;
  }

  std::vector<std::string> parts;
  parts.reserve(static_cast<std::size_t>(ncomp));
  for (int c = 0; c < ncomp; ++c) {
    detail::ComponentWriteSpec spec;
    spec.graph = &m;
    spec.hgraph = &m;
    spec.ranks = &ranks;
    for (std::size_t ai = 0; ai < m.atoms.size(); ++ai) {
      if (comp[ai] == c) {
        spec.component_atoms.push_back(static_cast<int>(ai));
      }
    }
    parts.push_back(detail::write_component(spec));
  }
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k > 0) {
      out += ".";
    }
    out += parts[k];
  }
  return out;
}

bool mol_equal(const MolGraph &a, const MolGraph &b) {
  return write_canonical(a) == write_canonical(b);
}

}  // namespace safeflow
