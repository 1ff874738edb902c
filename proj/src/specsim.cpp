//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/specsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace safeflow {

namespace {

// IUPAC 2021 monoisotopic masses, most abundant isotope.
constexpr double kMasses[] = {
    11.0093054,     // B
    12.0,           // C
    14.0030740048,  // N
    15.9949146196,  // O
    30.97376163,    // P
    31.97207100,    // S
    18.99840322,    // F
    34.96885268,    // Cl
    78.9183371,     // Br
    126.904473,     // I
};
constexpr double kHydrogenMass = 1.00782503207;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double element_monoisotopic_mass(Element e) {
  return kMasses[static_cast<std::size_t>(e)];
}

double hydrogen_monoisotopic_mass() { return kHydrogenMass; }

double monoisotopic_mass(const MolGraph &m) {
  double total = 0.0;
  for (const auto &a : m.atoms) {
    total += element_monoisotopic_mass(a.element) + kHydrogenMass * a.hcount;
  }
  return total;
}

Spectrum simulate_spectrum(const MolGraph &m) {
  if (m.atoms.empty()) {
    throw DataError("cannot simulate a spectrum for an empty molecule");
  }
  struct RawPeak {
    double mz;
    double intensity;
  };
  std::vector<RawPeak> raw;
  raw.push_back({monoisotopic_mass(m), static_cast<double>(m.atoms.size())});

  const auto adj = m.adjacency();
  for (int bi = 0; bi < static_cast<int>(m.bonds.size()); ++bi) {
    const Bond &bond = m.bonds[static_cast<std::size_t>(bi)];
    if (bond.in_ring || bond.order != BondOrder::Single) {
      continue;
    }
    // The bond is a bridge, so removing it splits the component in two.
    std::vector<char> side(m.atoms.size(), 0);
    std::vector<int> stack = {bond.a};
    side[static_cast<std::size_t>(bond.a)] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto &[v, ei] : adj[static_cast<std::size_t>(u)]) {
        if (ei == bi || side[static_cast<std::size_t>(v)]) {
          continue;
        }
        side[static_cast<std::size_t>(v)] = 1;
        stack.push_back(v);
      }
    }
    double mass_a = 0.0;
    double mass_b = 0.0;
    int count_a = 0;
    int count_b = 0;
    for (std::size_t ai = 0; ai < m.atoms.size(); ++ai) {
      const double am = element_monoisotopic_mass(m.atoms[ai].element) +
                        kHydrogenMass * m.atoms[ai].hcount;
      if (side[ai]) {
        mass_a += am;
        ++count_a;
      } else {
        mass_b += am;
        ++count_b;
      }
    }
    raw.push_back({mass_a, static_cast<double>(count_a)});
    raw.push_back({mass_b, static_cast<double>(count_b)});
  }

  std::sort(raw.begin(), raw.end(),
            [](const RawPeak &x, const RawPeak &y) { return x.mz < y.mz; });

  Spectrum s;
  s.precursor_mz = monoisotopic_mass(m);
  constexpr double kMergeTol = 1e-9;
  for (const auto &p : raw) {
    if (!s.peaks.empty() && p.mz - s.peaks.back().mz < kMergeTol) {
      s.peaks.back().intensity += p.intensity;
    } else {
      s.peaks.push_back({p.mz, p.intensity});
    }
  }
  double max_int = 0.0;
  for (const auto &p : s.peaks) {
    max_int = std::max(max_int, p.intensity);
  }
  for (auto &p : s.peaks) {
    p.intensity /= max_int;
  }
  return s;
}

std::vector<double> bin_spectrum(const Spectrum &s, int nbins, double max_mz) {
  if (nbins < 1) {
    throw DataError("bin_spectrum: nbins must be >= 1");
  }
  if (!(max_mz > 0.0)) {
    throw DataError("bin_spectrum: max_mz must be > 0");
  }
  std::vector<double> bins(static_cast<std::size_t>(nbins), 0.0);
  const double width = max_mz / nbins;
  for (const auto &p : s.peaks) {
    int idx = static_cast<int>(std::floor(p.mz / width));
    idx = std::min(std::max(idx, 0), nbins - 1);
    bins[static_cast<std::size_t>(idx)] += p.intensity;
  }
  double max_val = 0.0;
  for (double v : bins) {
    max_val = std::max(max_val, v);
  }
  if (max_val > 0.0) {
    for (auto &v : bins) {
      v /= max_val;
    }
  }
  return bins;
}

std::string mgf_to_text(const std::vector<SpectrumRecord> &records) {
  std::string out;
  for (const auto &r : records) {
    out += "BEGIN IONS\n";
    out += "TITLE=" + r.id + "\n";
    if (!r.smiles.empty()) {
      out += "SMILES=" + r.smiles + "\n";
    }
    out += "PEPMASS=" + format_double(r.spectrum.precursor_mz) + "\n";
    for (const auto &p : r.spectrum.peaks) {
      out += format_double(p.mz) + " " + format_double(p.intensity) + "\n";
    }
    out += "END IONS\n\n";
  }
  return out;
}

std::vector<SpectrumRecord> mgf_from_text(std::string_view text) {
  std::vector<SpectrumRecord> records;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool inside = false;
  SpectrumRecord current;
  bool have_title = false;
  bool have_pepmass = false;

  auto fail = [&](const std::string &msg) {
    throw DataError("MGF line " + std::to_string(lineno) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (line == "BEGIN IONS") {
      if (inside) {
        fail("nested BEGIN IONS");
      }
      inside = true;
      current = SpectrumRecord{};
      have_title = have_pepmass = false;
      continue;
    }
    if (line == "END IONS") {
      if (!inside) {
        fail("END IONS without BEGIN IONS");
      }
      if (!have_title) {
        fail("record is missing TITLE");
      }
      if (!have_pepmass) {
        fail("record is missing PEPMASS");
      }
      std::sort(current.spectrum.peaks.begin(), current.spectrum.peaks.end(),
                [](const Peak &a, const Peak &b) { return a.mz < b.mz; });
      records.push_back(std::move(current));
      inside = false;
      continue;
    }
    if (!inside) {
      fail("content outside BEGIN IONS/END IONS");
    }
    if (line.rfind("TITLE=", 0) == 0) {
      current.id = line.substr(6);
      have_title = true;
      continue;
    }
    if (line.rfind("SMILES=", 0) == 0) {
      current.smiles = line.substr(7);
      continue;
    }
    if (line.rfind("PEPMASS=", 0) == 0) {
      try {
        current.spectrum.precursor_mz = std::stod(line.substr(8));
      } catch (const std::exception &) {
        fail("bad PEPMASS value");
      }
      have_pepmass = true;
      continue;
    }
    // Peak line: "<mz> <intensity>".
    std::istringstream fields(line);
    double mz = 0.0;
    double intensity = 0.0;
    if (!(fields >> mz >> intensity)) {
      fail("bad peak line: " + line);
    }
    current.spectrum.peaks.push_back({mz, intensity});
  }
  if (inside) {
    fail("unterminated record (missing END IONS)");
  }
  return records;
}

void write_mgf(const std::vector<SpectrumRecord> &records, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open spectrum file for writing: " + path);
  }
  out << mgf_to_text(records);
}

std::vector<SpectrumRecord> read_mgf(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open spectrum file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return mgf_from_text(buf.str());
}

// ---------------------------------------------------------------------------
// Descriptor files
// ---------------------------------------------------------------------------

namespace {

std::vector<double> parse_float_list(const std::string &text, std::size_t lineno) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) {
      comma = text.size();
    }
    const std::string field = text.substr(start, comma - start);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(field, &used));
      while (used < field.size() &&
             std::isspace(static_cast<unsigned char>(field[used]))) {
        ++used;
      }
      if (used != field.size()) {
        throw std::invalid_argument(field);
      }
    } catch (const std::exception &) {
      throw DataError("non-numeric descriptor field on line " +
                      std::to_string(lineno) + ": '" + field + "'");
    }
    if (comma == text.size()) {
      break;
    }
    start = comma + 1;
  }
  return out;
}

}  // namespace

DescriptorSet descriptors_from_text(std::string_view text) {
  DescriptorSet set;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  int ordinal = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::string id;
    std::string payload;
    const std::size_t tab = line.find('\t');
    if (tab != std::string::npos) {
      // Corpus form: SMILES<TAB>floats; ids are molecule ordinals.
      id = std::to_string(ordinal);
      payload = line.substr(tab + 1);
    } else {
      const std::size_t comma = line.find(',');
      if (comma == std::string::npos) {
        throw DataError("descriptor line " + std::to_string(lineno) +
                        " has no values: " + line);
      }
      id = line.substr(0, comma);
      payload = line.substr(comma + 1);
    }
    ++ordinal;
    std::vector<double> values = parse_float_list(payload, lineno);
    if (values.empty()) {
      throw DataError("descriptor line " + std::to_string(lineno) + " is empty");
    }
    if (set.dim == 0) {
      set.dim = static_cast<int>(values.size());
    } else if (set.dim != static_cast<int>(values.size())) {
      throw DataError("ragged descriptor dimensions: line " +
                      std::to_string(lineno) + " has " +
                      std::to_string(values.size()) + " values, expected " +
                      std::to_string(set.dim));
    }
    set.entries.emplace_back(std::move(id), std::move(values));
  }
  if (set.entries.empty()) {
    throw DataError("descriptor file contains no records");
  }
  return set;
}

DescriptorSet load_descriptors(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open descriptor file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return descriptors_from_text(buf.str());
}

}  // namespace safeflow
