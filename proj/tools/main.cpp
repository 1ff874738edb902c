//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver. Subcommands: build-vocab, train, sample, evaluate,
// simulate-spectra, canonicalize, fragment. Long-form flags only.
#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "safeflow/commands.hpp"

namespace {

// Flag overrides arrive as "key=value" strings.
std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string> &raw) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto &s : raw) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw CLI::ValidationError("--set expects key=value, got '" + s + "'");
    }
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string &csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string field;
  while (std::getline(ss, field, ',')) {
    out.push_back(std::stoi(field));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string &csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string field;
  while (std::getline(ss, field, ',')) {
    out.push_back(std::stod(field));
  }
  return out;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{
      "safeflow: SAFE-sequence discrete flow matching for molecule "
      "elucidation from spectra.\n"
      "Corpus SMILES must be pre-normalized (aromatic rings lowercase); use "
      "the canonicalize subcommand to prepare inputs."};
  app.require_subcommand(1);

  // build-vocab
  safeflow::BuildVocabArgs bv;
  auto *cmd_bv = app.add_subcommand("build-vocab", "Build a token vocabulary from a corpus");
  cmd_bv->add_option("--in", bv.corpus, "corpus file (one SMILES per line)")->required();
  cmd_bv->add_option("--out", bv.out, "output vocabulary file")->required();
  cmd_bv->add_option("--max-len", bv.max_len, "sequence length L");
  cmd_bv->add_option("--max-cuts", bv.max_cuts, "fragmentation cut cap");

  // train
  safeflow::TrainArgs tr;
  std::vector<std::string> tr_overrides;
  std::string tr_seed;
  auto *cmd_tr = app.add_subcommand("train", "Train the denoiser");
  cmd_tr->add_option("--config", tr.common.config_path, "key=value config file");
  cmd_tr->add_option("--corpus", tr.corpus, "training corpus")->required();
  cmd_tr->add_option("--vocab", tr.vocab, "vocabulary file")->required();
  cmd_tr->add_option("--out", tr.out_dir, "output directory")->required();
  cmd_tr->add_option("--set", tr_overrides, "override config values (key=value)");
  cmd_tr->add_option("--seed", tr_seed, "training seed (overrides config)");

  // sample
  safeflow::SampleArgs sa;
  std::vector<std::string> sa_overrides;
  std::string sa_seed;
  auto *cmd_sa = app.add_subcommand("sample", "Sample molecules from a checkpoint");
  cmd_sa->add_option("--config", sa.common.config_path, "key=value config file");
  cmd_sa->add_option("--checkpoint", sa.checkpoint, "trained checkpoint")->required();
  cmd_sa->add_option("--vocab", sa.vocab, "vocabulary file")->required();
  cmd_sa->add_option("--conditions", sa.conditions,
                     "condition source: .mgf spectra or descriptor CSV/TSV");
  cmd_sa->add_flag("--unconditional", sa.unconditional,
                   "ignore condition vectors (null conditioning)");
  cmd_sa->add_option("--out", sa.out_dir, "output directory")->required();
  cmd_sa->add_option("--workers", sa.workers, "sampling worker threads");
  cmd_sa->add_option("--set", sa_overrides, "override config values (key=value)");
  cmd_sa->add_option("--seed", sa_seed, "sampling seed (overrides config)");

  // evaluate
  safeflow::EvaluateArgs ev;
  std::string ev_k = "1,10";
  std::string ev_strat_edges;
  std::string ev_filter_atoms;
  auto *cmd_ev = app.add_subcommand("evaluate", "Score predictions against a truth corpus");
  cmd_ev->add_option("--predictions", ev.predictions, "samples.tsv from `sample`")->required();
  cmd_ev->add_option("--corpus", ev.corpus, "truth corpus (ids are line ordinals)")->required();
  cmd_ev->add_option("--out", ev.out_dir, "output directory")->required();
  cmd_ev->add_option("--k", ev_k, "comma-separated k cutoffs (default 1,10)");
  cmd_ev->add_option("--mces-budget", ev.mces_budget, "MCES node-expansion budget");
  cmd_ev->add_flag("--json", ev.write_json, "also write summary.json");
  cmd_ev->add_option("--stratify-by", ev.stratify_by, "n_atoms or n_rotatable");
  cmd_ev->add_option("--stratify-edges", ev_strat_edges, "comma-separated bin edges");
  cmd_ev->add_option("--filter-atoms", ev_filter_atoms,
                     "min,max heavy-atom filter applied before stratification");

  // simulate-spectra
  safeflow::SimulateArgs si;
  auto *cmd_si = app.add_subcommand("simulate-spectra", "Write toy spectra for a corpus");
  cmd_si->add_option("--in", si.corpus, "corpus file")->required();
  cmd_si->add_option("--out", si.out, "output MGF file")->required();

  // canonicalize
  safeflow::CanonicalizeArgs ca;
  auto *cmd_ca = app.add_subcommand("canonicalize", "Canonicalize a corpus in place");
  cmd_ca->add_option("--in", ca.in, "input file")->required();
  cmd_ca->add_option("--out", ca.out, "output file")->required();

  // fragment
  safeflow::FragmentArgs fr;
  auto *cmd_fr = app.add_subcommand("fragment", "Emit SAFE fragment strings");
  cmd_fr->add_option("--in", fr.in, "corpus file")->required();
  cmd_fr->add_option("--out", fr.out, "output file")->required();
  cmd_fr->add_option("--max-cuts", fr.max_cuts, "fragmentation cut cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : safeflow::kExitConfig;
  }

  try {
    if (*cmd_bv) {
      return safeflow::run_build_vocab(bv);
    }
    if (*cmd_tr) {
      tr.common.overrides = parse_overrides(tr_overrides);
      if (!tr_seed.empty()) {
        tr.common.overrides.emplace_back("seed", tr_seed);
      }
      return safeflow::run_train(tr);
    }
    if (*cmd_sa) {
      sa.common.overrides = parse_overrides(sa_overrides);
      if (!sa_seed.empty()) {
        sa.common.overrides.emplace_back("seed", sa_seed);
      }
      return safeflow::run_sample(sa);
    }
    if (*cmd_ev) {
      ev.k_values = parse_int_list(ev_k);
      if (!ev_strat_edges.empty()) {
        ev.stratify_edges = parse_double_list(ev_strat_edges);
      }
      if (!ev_filter_atoms.empty()) {
        const auto lims = parse_int_list(ev_filter_atoms);
        if (lims.size() != 2) {
          std::cerr << "config error: --filter-atoms expects min,max\n";
          return safeflow::kExitConfig;
        }
        ev.filter_atoms = {lims[0], lims[1]};
      }
      return safeflow::run_evaluate(ev);
    }
    if (*cmd_si) {
      return safeflow::run_simulate_spectra(si);
    }
    if (*cmd_ca) {
      return safeflow::run_canonicalize(ca);
    }
    if (*cmd_fr) {
      return safeflow::run_fragment(fr);
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return safeflow::kExitConfig;
  }
  return safeflow::kExitConfig;
}
