//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "safeflow/checkpoint.hpp"
#include "safeflow/config.hpp"
#include "safeflow/evalharness.hpp"
#include "safeflow/flow.hpp"
#include "safeflow/model.hpp"
#include "safeflow/molgraph.hpp"
#include "safeflow/safe.hpp"
#include "safeflow/specsim.hpp"
#include "safeflow/vocab.hpp"

namespace safeflow {

namespace {

namespace fs = std::filesystem;

int guard(const std::function<void()> &body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError &e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

void write_text_file(const std::string &path, const std::string &content) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    fs::create_directories(p.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open output file: " + path);
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw DataError("failed writing output file: " + path);
  }
}

struct CorpusEntry {
  std::string id;  // ordinal, 0-based
  std::string smiles;
  MolGraph mol;
  std::vector<double> payload;  // optional TAB floats
};

std::vector<CorpusEntry> load_corpus(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open corpus file: " + path);
  }
  std::vector<CorpusEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    CorpusEntry e;
    const std::size_t tab = line.find('\t');
    e.smiles = tab == std::string::npos ? line : line.substr(0, tab);
    e.id = std::to_string(entries.size());
    try {
      e.mol = parse_smiles(e.smiles);
    } catch (const Error &err) {
      throw DataError("corpus line " + std::to_string(lineno) + ": " + err.what());
    }
    if (tab != std::string::npos) {
      std::size_t start = tab + 1;
      while (start <= line.size()) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
          comma = line.size();
        }
        const std::string field = line.substr(start, comma - start);
        try {
          e.payload.push_back(std::stod(field));
        } catch (const std::exception &) {
          throw DataError("corpus line " + std::to_string(lineno) +
                          ": bad condition value '" + field + "'");
        }
        if (comma == line.size()) {
          break;
        }
        start = comma + 1;
      }
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) {
    throw DataError("corpus file has no molecules: " + path);
  }
  return entries;
}

std::string format_real(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// build-vocab / fragment / canonicalize / simulate-spectra
// ---------------------------------------------------------------------------

int run_build_vocab(const BuildVocabArgs &args) {
  return guard([&] {
    if (args.max_len < 1) {
      throw ConfigError("--max-len must be positive");
    }
    const auto corpus = load_corpus(args.corpus);
    std::vector<std::string> safes;
    safes.reserve(corpus.size());
    for (const auto &e : corpus) {
      safes.push_back(encode_safe(e.mol, training_cuts(e.mol, args.max_cuts)));
    }
    VocabBuildReport report;
    const Vocabulary vocab = build_vocab(safes, args.max_len, &report);
    save_vocab(vocab, args.out);
    std::cout << "vocab.size=" << vocab.size() << "\n"
              << "vocab.max_len=" << vocab.max_len << "\n"
              << "vocab.total=" << report.total << "\n"
              << "vocab.fitting=" << report.fitting << "\n"
              << "vocab.coverage=" << format_real(report.coverage()) << "\n";
  });
}

int run_fragment(const FragmentArgs &args) {
  return guard([&] {
    const auto corpus = load_corpus(args.in);
    std::string out;
    for (const auto &e : corpus) {
      out += encode_safe(e.mol, training_cuts(e.mol, args.max_cuts)) + "\n";
    }
    write_text_file(args.out, out);
  });
}

int run_canonicalize(const CanonicalizeArgs &args) {
  return guard([&] {
    std::ifstream in(args.in);
    if (!in) {
      throw DataError("cannot open input file: " + args.in);
    }
    std::string line;
    std::string out;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
        line.pop_back();
      }
      if (line.empty() || line[0] == '#') {
        out += line + "\n";
        continue;
      }
      const std::size_t tab = line.find('\t');
      const std::string smiles = tab == std::string::npos ? line : line.substr(0, tab);
      try {
        const std::string canon = write_canonical(parse_smiles(smiles));
        out += tab == std::string::npos ? canon : canon + line.substr(tab);
      } catch (const Error &err) {
        throw DataError("line " + std::to_string(lineno) + ": " + err.what());
      }
      out += "\n";
    }
    write_text_file(args.out, out);
  });
}

int run_simulate_spectra(const SimulateArgs &args) {
  return guard([&] {
    const auto corpus = load_corpus(args.corpus);
    std::vector<SpectrumRecord> records;
    records.reserve(corpus.size());
    for (const auto &e : corpus) {
      SpectrumRecord r;
      r.id = e.id;
      r.smiles = e.smiles;
      r.spectrum = simulate_spectrum(e.mol);
      records.push_back(std::move(r));
    }
    const std::string text = mgf_to_text(records);
    write_text_file(args.out, text);
  });
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

enum class CondSource { Sim, Corpus, None };

CondSource parse_cond_source(const std::string &s) {
  if (s == "sim") {
    return CondSource::Sim;
  }
  if (s == "corpus") {
    return CondSource::Corpus;
  }
  if (s == "none") {
    return CondSource::None;
  }
  throw ConfigError("cond_source must be one of sim, corpus, none (got '" + s + "')");
}

struct TrainingItem {
  std::vector<std::vector<int>> fragment_tokens;  // per fragment, unpadded ids
  std::vector<double> condition;
};

// Token ids of one random fragment order, padded to max_len.
std::vector<int> render_tokens(const TrainingItem &item, const Vocabulary &vocab,
                               int dot_id, Rng &rng) {
  std::vector<int> order(item.fragment_tokens.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = static_cast<int>(i);
  }
  rng.shuffle(order);
  std::vector<int> ids;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0) {
      ids.push_back(dot_id);
    }
    const auto &frag = item.fragment_tokens[static_cast<std::size_t>(order[i])];
    ids.insert(ids.end(), frag.begin(), frag.end());
  }
  ids.resize(static_cast<std::size_t>(vocab.max_len), vocab.pad_token);
  return ids;
}

}  // namespace

int run_train(const TrainArgs &args) {
  return guard([&] {
    RunConfig cfg = args.common.config_path.empty()
                        ? RunConfig()
                        : RunConfig::from_file(args.common.config_path);
    for (const auto &[k, v] : args.common.overrides) {
      cfg.set(k, v);
    }

    const std::uint64_t seed = cfg.require_seed();
    const double lr = cfg.real("lr", 3e-4);
    const std::string lr_schedule = cfg.str("lr_schedule", "constant");
    const double lr_min = cfg.real("lr_min", lr * 0.1);
    if (lr_schedule != "constant" && lr_schedule != "cosine") {
      throw ConfigError("lr_schedule must be constant or cosine");
    }
    const int batch_size = cfg.integer("batch", 64);
    const int epochs = cfg.integer("epochs", 1);
    const double cond_drop = cfg.real("cond_drop_prob", 0.1);
    const int max_cuts = cfg.integer("max_cuts", 8);
    const CondSource cond_source = parse_cond_source(cfg.str("cond_source", "sim"));
    const int spec_bins = cfg.integer("spec_bins", 256);
    const double spec_max_mz = cfg.real("spec_max_mz", 1000.0);
    if (lr <= 0.0 || batch_size < 1 || epochs < 1 || cond_drop < 0.0 ||
        cond_drop > 1.0 || max_cuts < 0 || spec_bins < 1 || spec_max_mz <= 0.0) {
      throw ConfigError("training parameters out of range");
    }

    const Vocabulary vocab = load_vocab(args.vocab);
    const Sha256 vocab_hash = sha256_file(args.vocab);
    const auto corpus = load_corpus(args.corpus);

    DenoiserConfig model_cfg;
    model_cfg.d_model = cfg.integer("d_model", 128);
    model_cfg.n_layers = cfg.integer("n_layers", 4);
    model_cfg.n_heads = cfg.integer("n_heads", 4);
    model_cfg.d_ff = cfg.integer("d_ff", 512);
    model_cfg.vocab_size = vocab.size();
    model_cfg.max_len = vocab.max_len;
    switch (cond_source) {
      case CondSource::Sim: model_cfg.cond_dim = spec_bins; break;
      case CondSource::Corpus:
        model_cfg.cond_dim = corpus.front().payload.empty()
                                 ? 0
                                 : static_cast<int>(corpus.front().payload.size());
        break;
      case CondSource::None: model_cfg.cond_dim = 1; break;
    }
    model_cfg.validate();

    // Tokenize each molecule once, per fragment; epochs only reshuffle.
    const int dot_id = vocab.find(".");
    std::vector<TrainingItem> items;
    int skipped = 0;
    for (const auto &e : corpus) {
      const SafeString safe = encode_safe(e.mol, training_cuts(e.mol, max_cuts));
      TrainingItem item;
      std::size_t total = 0;
      bool ok = true;
      try {
        for (const auto &frag : split_fragments(safe)) {
          std::vector<int> ids;
          for (const auto &tok : lex_tokens(frag)) {
            const int id = vocab.find(tok);
            if (id < 0) {
              throw DataError("token '" + tok + "' missing from vocabulary (molecule " +
                              e.id + ")");
            }
            ids.push_back(id);
          }
          total += ids.size() + 1;
          item.fragment_tokens.push_back(std::move(ids));
        }
      } catch (const ParseError &err) {
        throw DataError(std::string("molecule ") + e.id + ": " + err.what());
      }
      if (total - 1 > static_cast<std::size_t>(vocab.max_len)) {
        ++skipped;
        continue;
      }
      if (item.fragment_tokens.size() > 1 && dot_id < 0) {
        throw DataError("vocabulary lacks the '.' token needed for fragments");
      }
      switch (cond_source) {
        case CondSource::Sim:
          item.condition = bin_spectrum(simulate_spectrum(e.mol), spec_bins, spec_max_mz);
          break;
        case CondSource::Corpus:
          if (static_cast<int>(e.payload.size()) != model_cfg.cond_dim ||
              e.payload.empty()) {
            throw DataError("molecule " + e.id + " has no condition vector of width " +
                            std::to_string(model_cfg.cond_dim));
          }
          item.condition = e.payload;
          break;
        case CondSource::None:
          item.condition.assign(1, 0.0);
          break;
      }
      items.push_back(std::move(item));
    }
    if (items.empty()) {
      throw DataError("no corpus molecule fits within max_len " +
                      std::to_string(vocab.max_len));
    }
    if (skipped > 0) {
      std::cerr << "note: skipped " << skipped << " molecules longer than max_len\n";
    }

    Rng init_rng(seed, 0);
    Parameters params = init_parameters(model_cfg, init_rng);
    AdamState adam;
    Rng train_rng(seed, 1);
    const long long steps_per_epoch =
        (static_cast<long long>(items.size()) + batch_size - 1) / batch_size;
    const long long total_steps = steps_per_epoch * epochs;

    const int length = model_cfg.max_len;
    const int nvocab = model_cfg.vocab_size;
    std::string loss_csv = "epoch,loss\n";

    for (int epoch = 0; epoch < epochs; ++epoch) {
      std::vector<int> order(items.size());
      for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = static_cast<int>(i);
      }
      train_rng.shuffle(order);

      // Draw every sample for the epoch up front; the loss is evaluated on
      // these with the epoch-start parameters, then the same batches train.
      std::vector<DenoiserBatch> batches;
      std::vector<std::vector<int>> batch_targets;
      DenoiserBatch current;
      std::vector<int> current_targets;
      auto flush = [&] {
        if (current.batch > 0) {
          batches.push_back(std::move(current));
          batch_targets.push_back(std::move(current_targets));
          current = DenoiserBatch{};
          current_targets.clear();
        }
      };
      for (int idx : order) {
        const TrainingItem &item = items[static_cast<std::size_t>(idx)];
        const std::vector<int> x1 = render_tokens(item, vocab, dot_id, train_rng);
        const double t = train_rng.next_double();
        TokenSeq x0;
        x0.ids.resize(static_cast<std::size_t>(length));
        for (int pos = 0; pos < length; ++pos) {
          x0.ids[static_cast<std::size_t>(pos)] = train_rng.next_below(nvocab);
        }
        TokenSeq x1_seq;
        x1_seq.ids = x1;
        const TokenSeq xt = interpolate(x0, x1_seq, t, train_rng);
        const double drop_draw = train_rng.next_double();
        const bool drop = cond_source == CondSource::None || drop_draw < cond_drop;

        current.tokens.insert(current.tokens.end(), xt.ids.begin(), xt.ids.end());
        current.times.push_back(t);
        current.conditions.insert(current.conditions.end(), item.condition.begin(),
                                  item.condition.end());
        current.drop.push_back(drop ? 1 : 0);
        current.batch += 1;
        current_targets.insert(current_targets.end(), x1.begin(), x1.end());
        if (current.batch == batch_size) {
          flush();
        }
      }
      flush();

      // Epoch loss with frozen parameters.
      double loss_sum = 0.0;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        Tape tape(/*recording=*/false);
        const ForwardHandles h = build_forward(tape, model_cfg, params, batches[b]);
        const Tensor &logits = tape.value(h.logits);
        for (int s = 0; s < batches[b].batch; ++s) {
          TokenSeq target;
          target.ids.assign(
              batch_targets[b].begin() + static_cast<std::ptrdiff_t>(s) * length,
              batch_targets[b].begin() + static_cast<std::ptrdiff_t>(s + 1) * length);
          loss_sum += ce_loss(
              std::span<const double>(
                  logits.data.data() +
                      static_cast<std::size_t>(s) * length * nvocab,
                  static_cast<std::size_t>(length) * nvocab),
              target, nvocab);
        }
      }
      const double mean_token_loss =
          loss_sum / (static_cast<double>(items.size()) * length);
      if (!std::isfinite(mean_token_loss)) {
        throw NumericError("training loss diverged at epoch " + std::to_string(epoch));
      }
      loss_csv += std::to_string(epoch) + "," + format_real(mean_token_loss) + "\n";

      // Gradient steps.
      for (std::size_t b = 0; b < batches.size(); ++b) {
        Tape tape(/*recording=*/true);
        const ForwardHandles h = build_forward(tape, model_cfg, params, batches[b]);
        const int loss_id = tape.cross_entropy_sum(h.logits, batch_targets[b]);
        if (!std::isfinite(tape.value(loss_id).data[0])) {
          throw NumericError("training loss diverged at epoch " + std::to_string(epoch));
        }
        tape.backward(loss_id);
        std::vector<Tensor> grads;
        grads.reserve(h.param_ids.size());
        for (const auto &[name, id] : h.param_ids) {
          grads.push_back(tape.grad(id));
        }
        double step_lr = lr;
        if (lr_schedule == "cosine") {
          const double progress =
              static_cast<double>(adam.step) / static_cast<double>(total_steps);
          step_lr = lr_min + 0.5 * (lr - lr_min) * (1.0 + std::cos(3.141592653589793 * progress));
        }
        adam_step(params, grads, adam, step_lr);
      }
    }

    // Outputs only after a fully successful run.
    Checkpoint ckpt;
    ckpt.params = std::move(params);
    ckpt.config_kv = model_cfg.to_kv();
    ckpt.config_kv["cond_source"] = cfg.str("cond_source", "sim");
    ckpt.config_kv["spec_bins"] = std::to_string(spec_bins);
    ckpt.config_kv["spec_max_mz"] = format_real(spec_max_mz);
    ckpt.vocab_hash = vocab_hash;
    fs::create_directories(args.out_dir);
    save_checkpoint(ckpt, (fs::path(args.out_dir) / "checkpoint.dfm").string());
    write_text_file((fs::path(args.out_dir) / "loss.csv").string(), loss_csv);
    write_text_file((fs::path(args.out_dir) / "config.effective").string(),
                    cfg.effective_text());
  });
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

namespace {

struct ConditionRecord {
  std::string id;
  std::vector<double> values;  // empty for unconditional records
};

}  // namespace

int run_sample(const SampleArgs &args) {
  return guard([&] {
    RunConfig cfg = args.common.config_path.empty()
                        ? RunConfig()
                        : RunConfig::from_file(args.common.config_path);
    for (const auto &[k, v] : args.common.overrides) {
      cfg.set(k, v);
    }
    SamplerConfig sampler;
    sampler.steps = cfg.integer("steps", 50);
    sampler.guidance = cfg.real("guidance", 1.5);
    sampler.samples_per_condition = cfg.integer("samples_per_condition", 100);
    sampler.seed = cfg.require_seed();
    if (sampler.steps < 1 || sampler.samples_per_condition < 1 ||
        sampler.guidance < 0.0) {
      throw ConfigError("sampler parameters out of range");
    }
    if (args.workers < 1) {
      throw ConfigError("--workers must be >= 1");
    }

    const Vocabulary vocab = load_vocab(args.vocab);
    const Sha256 vocab_hash = sha256_file(args.vocab);
    const Checkpoint ckpt = load_checkpoint(args.checkpoint, vocab_hash);
    const DenoiserConfig model_cfg = ckpt.model_config();
    if (model_cfg.vocab_size != vocab.size() || model_cfg.max_len != vocab.max_len) {
      throw DataError("checkpoint and vocabulary disagree on dimensions");
    }

    // Conditions.
    std::vector<ConditionRecord> records;
    if (args.conditions.empty()) {
      if (!args.unconditional) {
        throw ConfigError("either --conditions or --unconditional is required");
      }
      records.push_back({"unconditional", {}});
    } else if (args.conditions.size() > 4 &&
               args.conditions.substr(args.conditions.size() - 4) == ".mgf") {
      const auto spectra = read_mgf(args.conditions);
      int bins = model_cfg.cond_dim;
      double max_mz = 1000.0;
      if (const auto it = ckpt.config_kv.find("spec_bins"); it != ckpt.config_kv.end()) {
        bins = std::stoi(it->second);
      }
      if (const auto it = ckpt.config_kv.find("spec_max_mz"); it != ckpt.config_kv.end()) {
        max_mz = std::stod(it->second);
      }
      if (bins != model_cfg.cond_dim) {
        throw DataError("checkpoint expects condition dim " +
                        std::to_string(model_cfg.cond_dim) +
                        " but spectrum binning provides " + std::to_string(bins));
      }
      for (const auto &rec : spectra) {
        records.push_back({rec.id, bin_spectrum(rec.spectrum, bins, max_mz)});
      }
    } else {
      const DescriptorSet set = load_descriptors(args.conditions);
      if (set.dim != model_cfg.cond_dim) {
        throw DataError("condition dimension mismatch: checkpoint expects " +
                        std::to_string(model_cfg.cond_dim) + ", file provides " +
                        std::to_string(set.dim));
      }
      for (const auto &[id, values] : set.entries) {
        records.push_back({id, values});
      }
    }
    if (args.unconditional) {
      for (auto &r : records) {
        r.values.clear();
      }
    }

    BatchDenoiserFn denoiser = [&](const std::vector<TokenSeq> &batch, double t,
                                   const std::vector<double> *condition,
                                   std::vector<double> &logits_out) {
      denoiser_logits(model_cfg, ckpt.params, batch, t, condition, logits_out);
    };

    const int n = sampler.samples_per_condition;
    std::string out_tsv;
    for (std::size_t rec_idx = 0; rec_idx < records.size(); ++rec_idx) {
      const ConditionRecord &rec = records[rec_idx];
      const std::vector<double> *cond = rec.values.empty() ? nullptr : &rec.values;

      // One RNG stream per sample, numbered globally across records, split
      // into contiguous chunks per worker.
      std::vector<TokenSeq> sequences(static_cast<std::size_t>(n));
      const int nchunks = std::min(args.workers, n);
      std::vector<std::thread> pool;
      std::vector<std::string> errors(static_cast<std::size_t>(nchunks));
      const int chunk_size = (n + nchunks - 1) / nchunks;
      for (int c = 0; c < nchunks; ++c) {
        const int begin = c * chunk_size;
        const int end = std::min(n, begin + chunk_size);
        if (begin >= end) {
          continue;
        }
        pool.emplace_back([&, c, begin, end] {
          try {
            std::vector<std::uint64_t> streams;
            streams.reserve(static_cast<std::size_t>(end - begin));
            for (int s = begin; s < end; ++s) {
              streams.push_back(static_cast<std::uint64_t>(rec_idx) * n + s);
            }
            auto result = sample_streams(denoiser, cond, sampler, model_cfg.max_len,
                                         model_cfg.vocab_size, streams);
            for (int s = begin; s < end; ++s) {
              sequences[static_cast<std::size_t>(s)] =
                  std::move(result[static_cast<std::size_t>(s - begin)]);
            }
          } catch (const std::exception &e) {
            errors[static_cast<std::size_t>(c)] = e.what();
          }
        });
      }
      for (auto &t : pool) {
        t.join();
      }
      for (const auto &err : errors) {
        if (!err.empty()) {
          throw Error("sampling failed: " + err);
        }
      }

      std::vector<std::string> raw;
      raw.reserve(static_cast<std::size_t>(n));
      for (const auto &seq : sequences) {
        raw.push_back(detokenize(seq, vocab));
      }
      const RankedCandidates ranked = rank_by_frequency(raw);

      for (const auto &r : raw) {
        out_tsv += rec.id + "\tRAW\t" + r + "\n";
      }
      for (const auto &[canon, count] : ranked.entries) {
        out_tsv += rec.id + "\tCAND\t" + canon + "\t" + std::to_string(count) + "\n";
      }
      out_tsv += rec.id + "\tSTATS\t" + std::to_string(ranked.valid()) + "\t" +
                 std::to_string(ranked.invalid) + "\n";
    }

    fs::create_directories(args.out_dir);
    write_text_file((fs::path(args.out_dir) / "samples.tsv").string(), out_tsv);
    write_text_file((fs::path(args.out_dir) / "config.effective").string(),
                    cfg.effective_text());
  });
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

namespace {

struct PredictionRecord {
  std::string id;
  RankedCandidates ranked;
};

std::vector<PredictionRecord> load_predictions(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open predictions file: " + path);
  }
  std::vector<PredictionRecord> records;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() < 2) {
      throw DataError("predictions line " + std::to_string(lineno) + " is malformed");
    }
    const std::string &id = fields[0];
    const std::string &kind = fields[1];
    auto it = index.find(id);
    if (it == index.end()) {
      index[id] = records.size();
      records.push_back({id, {}});
      it = index.find(id);
    }
    PredictionRecord &rec = records[it->second];
    if (kind == "RAW") {
      continue;  // provenance only
    }
    if (kind == "CAND") {
      if (fields.size() != 4) {
        throw DataError("predictions line " + std::to_string(lineno) +
                        ": CAND needs <smiles> <count>");
      }
      try {
        rec.ranked.entries.emplace_back(fields[2], std::stoi(fields[3]));
      } catch (const std::exception &) {
        throw DataError("predictions line " + std::to_string(lineno) + ": bad count");
      }
      continue;
    }
    if (kind == "STATS") {
      if (fields.size() != 4) {
        throw DataError("predictions line " + std::to_string(lineno) +
                        ": STATS needs <valid> <invalid>");
      }
      try {
        const int valid = std::stoi(fields[2]);
        const int invalid = std::stoi(fields[3]);
        rec.ranked.invalid = invalid;
        rec.ranked.total_samples = valid + invalid;
      } catch (const std::exception &) {
        throw DataError("predictions line " + std::to_string(lineno) + ": bad stats");
      }
      continue;
    }
    throw DataError("predictions line " + std::to_string(lineno) +
                    ": unknown row kind '" + kind + "'");
  }
  if (records.empty()) {
    throw DataError("predictions file has no records: " + path);
  }
  return records;
}

nlohmann::json summary_json(const Summary &s) {
  nlohmann::json j;
  j["rows"] = s.n_rows;
  for (std::size_t k = 0; k < s.k_values.size(); ++k) {
    const std::string suffix = std::to_string(s.k_values[k]);
    j["hit" + suffix] = s.hit[k];
    if (s.mean_tanimoto[k]) {
      j["tanimoto" + suffix] = *s.mean_tanimoto[k];
    } else {
      j["tanimoto" + suffix] = nullptr;
    }
    if (s.mean_mces[k]) {
      j["mces" + suffix] = *s.mean_mces[k];
    } else {
      j["mces" + suffix] = nullptr;
    }
  }
  j["validity"] = s.validity;
  return j;
}

}  // namespace

int run_evaluate(const EvaluateArgs &args) {
  return guard([&] {
    if (args.k_values.empty()) {
      throw ConfigError("--k must list at least one cutoff");
    }
    for (int k : args.k_values) {
      if (k < 1) {
        throw ConfigError("--k values must be >= 1");
      }
    }
    if (!args.stratify_by.empty() && args.stratify_edges.size() < 2) {
      throw ConfigError("--stratify-edges needs at least two edges");
    }

    const auto predictions = load_predictions(args.predictions);
    const auto corpus = load_corpus(args.corpus);
    std::map<std::string, const CorpusEntry *> by_id;
    for (const auto &e : corpus) {
      by_id[e.id] = &e;
    }

    TopkOptions opts;
    opts.k_values = args.k_values;
    opts.mces_budget = args.mces_budget;

    std::vector<MetricRow> rows;
    rows.reserve(predictions.size());
    for (const auto &pred : predictions) {
      const auto it = by_id.find(pred.id);
      if (it == by_id.end()) {
        throw DataError("unknown record id in predictions: " + pred.id);
      }
      MetricRow row = topk_report(pred.ranked, it->second->mol, opts);
      row.spectrum_id = pred.id;
      rows.push_back(std::move(row));
    }

    const Summary per_spectrum = aggregate(rows, Grouping::PerSpectrum);
    const Summary per_unique = aggregate(rows, Grouping::PerUniqueMolecule);
    std::string summary = summary_text(per_spectrum, per_unique);

    std::vector<StratBin> bins;
    if (!args.stratify_by.empty()) {
      StratProperty prop;
      if (args.stratify_by == "n_atoms") {
        prop = StratProperty::NAtoms;
      } else if (args.stratify_by == "n_rotatable") {
        prop = StratProperty::NRotatable;
      } else {
        throw ConfigError("--stratify-by must be n_atoms or n_rotatable");
      }
      bins = stratify(rows, prop, args.stratify_edges, args.filter_atoms);
      for (std::size_t b = 0; b < bins.size(); ++b) {
        const std::string prefix = "strat.bin" + std::to_string(b);
        summary += prefix + ".lo=" + format_real(bins[b].lo) + "\n";
        summary += prefix + ".hi=" + format_real(bins[b].hi) + "\n";
        summary += prefix + ".count=" + std::to_string(bins[b].count) + "\n";
        if (bins[b].summary) {
          for (std::size_t k = 0; k < bins[b].summary->k_values.size(); ++k) {
            const std::string suffix = std::to_string(bins[b].summary->k_values[k]);
            summary += prefix + ".hit" + suffix + "=" +
                       format_real(bins[b].summary->hit[k]) + "\n";
          }
        }
      }
    }

    std::cout << summary;

    fs::create_directories(args.out_dir);
    write_text_file((fs::path(args.out_dir) / "report.csv").string(),
                    report_csv(rows, args.k_values));
    write_text_file((fs::path(args.out_dir) / "summary.txt").string(), summary);
    if (args.write_json) {
      nlohmann::json j;
      j["per_spectrum"] = summary_json(per_spectrum);
      j["per_unique_molecule"] = summary_json(per_unique);
      if (!bins.empty()) {
        nlohmann::json strat = nlohmann::json::array();
        for (const auto &b : bins) {
          nlohmann::json jb;
          jb["lo"] = b.lo;
          jb["hi"] = b.hi;
          jb["count"] = b.count;
          if (b.summary) {
            jb["summary"] = summary_json(*b.summary);
          }
          strat.push_back(jb);
        }
        j["stratification"] = strat;
      }
      write_text_file((fs::path(args.out_dir) / "summary.json").string(),
                      j.dump(2) + "\n");
    }
  });
}

}  // namespace safeflow
