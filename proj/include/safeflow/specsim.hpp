//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "safeflow/molgraph.hpp"

namespace safeflow {

struct Peak {
  double mz = 0.0;
  double intensity = 0.0;
};

// Peaks sorted ascending by m/z, intensities max-normalized to 1.
struct Spectrum {
  std::vector<Peak> peaks;
  double precursor_mz = 0.0;
};

struct SpectrumRecord {
  std::string id;
  std::string smiles;  // optional
  Spectrum spectrum;
};

double element_monoisotopic_mass(Element e);
double hydrogen_monoisotopic_mass();

// Heavy atoms plus implicit hydrogens; 0 for the empty graph.
double monoisotopic_mass(const MolGraph &m);

// Deterministic toy fragmenter: one precursor peak, plus the two fragment
// masses of every acyclic single bond (fragments keep the parent's
// hydrogens). Equal m/z peaks merge by intensity summation; intensities
// are fragment heavy-atom counts, max-normalized.
Spectrum simulate_spectrum(const MolGraph &m);

// Fixed-length condition vector: floor(mz / (max_mz/nbins)) clamped to the
// last bin, intensities summed per bin, then max-normalized.
std::vector<double> bin_spectrum(const Spectrum &s, int nbins, double max_mz);

// MGF-like spectrum files.
std::string mgf_to_text(const std::vector<SpectrumRecord> &records);
std::vector<SpectrumRecord> mgf_from_text(std::string_view text);
void write_mgf(const std::vector<SpectrumRecord> &records, const std::string &path);
std::vector<SpectrumRecord> read_mgf(const std::string &path);

// Externally computed condition vectors, keyed by record id. Two formats:
// the corpus TAB form ("SMILES<TAB>v1,v2,..." with ordinal ids) and plain
// CSV ("id,v1,v2,..."). All rows must share one dimension.
struct DescriptorSet {
  std::vector<std::pair<std::string, std::vector<double>>> entries;
  int dim = 0;
};

DescriptorSet load_descriptors(const std::string &path);
DescriptorSet descriptors_from_text(std::string_view text);

}  // namespace safeflow
