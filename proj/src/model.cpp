//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/model.hpp"

#include <cmath>

namespace safeflow {

void DenoiserConfig::validate() const {
  if (d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model must be divisible by n_heads");
  }
  if (vocab_size < 2 || max_len < 1 || cond_dim < 1) {
    throw ConfigError("vocab_size, max_len and cond_dim must be set");
  }
}

std::map<std::string, std::string> DenoiserConfig::to_kv() const {
  return {
      {"d_model", std::to_string(d_model)},
      {"n_layers", std::to_string(n_layers)},
      {"n_heads", std::to_string(n_heads)},
      {"d_ff", std::to_string(d_ff)},
      {"vocab_size", std::to_string(vocab_size)},
      {"max_len", std::to_string(max_len)},
      {"cond_dim", std::to_string(cond_dim)},
  };
}

DenoiserConfig DenoiserConfig::from_kv(const std::map<std::string, std::string> &kv) {
  DenoiserConfig cfg;
  auto need = [&](const char *key) -> int {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      throw ConfigError(std::string("missing model config key: ") + key);
    }
    try {
      return std::stoi(it->second);
    } catch (const std::exception &) {
      throw ConfigError(std::string("bad model config value for ") + key);
    }
  };
  cfg.d_model = need("d_model");
  cfg.n_layers = need("n_layers");
  cfg.n_heads = need("n_heads");
  cfg.d_ff = need("d_ff");
  cfg.vocab_size = need("vocab_size");
  cfg.max_len = need("max_len");
  cfg.cond_dim = need("cond_dim");
  cfg.validate();
  return cfg;
}

Tensor &Parameters::at(const std::string &name) {
  for (auto &[n, t] : items) {
    if (n == name) {
      return t;
    }
  }
  throw Error("unknown parameter: " + name);
}

const Tensor &Parameters::at(const std::string &name) const {
  for (const auto &[n, t] : items) {
    if (n == name) {
      return t;
    }
  }
  throw Error("unknown parameter: " + name);
}

std::size_t Parameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto &[name, t] : items) {
    n += t.numel();
  }
  return n;
}

namespace {

void fill_gaussian(Tensor &t, Rng &rng, double std_dev) {
  for (auto &v : t.data) {
    v = std_dev * rng.next_gaussian();
  }
}

void fill_constant(Tensor &t, double value) {
  for (auto &v : t.data) {
    v = value;
  }
}

}  // namespace

Parameters init_parameters(const DenoiserConfig &cfg, Rng &rng) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto k = static_cast<std::size_t>(cfg.vocab_size);
  const auto l = static_cast<std::size_t>(cfg.max_len);
  const auto f = static_cast<std::size_t>(cfg.d_ff);
  const auto cd = static_cast<std::size_t>(cfg.cond_dim);
  const auto te = static_cast<std::size_t>(kTimeEmbedDim);
  constexpr double kInitStd = 0.02;

  Parameters p;
  auto gaussian = [&](const std::string &name, std::vector<std::size_t> dims) {
    Tensor t(std::move(dims));
    fill_gaussian(t, rng, kInitStd);
    p.items.emplace_back(name, std::move(t));
  };
  auto constant = [&](const std::string &name, std::vector<std::size_t> dims,
                      double value) {
    Tensor t(std::move(dims));
    fill_constant(t, value);
    p.items.emplace_back(name, std::move(t));
  };

  gaussian("tok_emb", {k, d});
  gaussian("pos_emb", {l, d});
  constant("cond_null", {1, cd}, 0.0);
  // The condition vector is sparse and max-normalized, so its projection
  // starts an order of magnitude larger to balance the time features.
  {
    Tensor t({cd, d});
    fill_gaussian(t, rng, 0.5);
    p.items.emplace_back("cond_proj_w", std::move(t));
  }
  constant("cond_proj_b", {1, d}, 0.0);
  gaussian("time_mlp_w1", {te + d, d});
  constant("time_mlp_b1", {1, d}, 0.0);
  gaussian("time_mlp_w2", {d, d});
  constant("time_mlp_b2", {1, d}, 0.0);
  for (int blk = 0; blk < cfg.n_layers; ++blk) {
    const std::string b = "blk" + std::to_string(blk) + "_";
    constant(b + "adaln1_sw", {d, d}, 0.0);
    constant(b + "adaln1_sb", {1, d}, 1.0);
    constant(b + "adaln1_bw", {d, d}, 0.0);
    constant(b + "adaln1_bb", {1, d}, 0.0);
    gaussian(b + "attn_wq", {d, d});
    constant(b + "attn_bq", {1, d}, 0.0);
    gaussian(b + "attn_wk", {d, d});
    constant(b + "attn_bk", {1, d}, 0.0);
    gaussian(b + "attn_wv", {d, d});
    constant(b + "attn_bv", {1, d}, 0.0);
    gaussian(b + "attn_wo", {d, d});
    constant(b + "attn_bo", {1, d}, 0.0);
    constant(b + "adaln2_sw", {d, d}, 0.0);
    constant(b + "adaln2_sb", {1, d}, 1.0);
    constant(b + "adaln2_bw", {d, d}, 0.0);
    constant(b + "adaln2_bb", {1, d}, 0.0);
    gaussian(b + "ffn_w1", {d, f});
    constant(b + "ffn_b1", {1, f}, 0.0);
    gaussian(b + "ffn_w2", {f, d});
    constant(b + "ffn_b2", {1, d}, 0.0);
  }
  constant("final_adaln_sw", {d, d}, 0.0);
  constant("final_adaln_sb", {1, d}, 1.0);
  constant("final_adaln_bw", {d, d}, 0.0);
  constant("final_adaln_bb", {1, d}, 0.0);
  gaussian("head_w", {d, k});
  constant("head_b", {1, k}, 0.0);
  return p;
}

std::vector<double> time_embedding(double t) {
  std::vector<double> emb(static_cast<std::size_t>(kTimeEmbedDim));
  const int half = kTimeEmbedDim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq =
        std::exp(std::log(10000.0) * static_cast<double>(i) / (half - 1));
    emb[static_cast<std::size_t>(i)] = std::sin(t * freq);
    emb[static_cast<std::size_t>(half + i)] = std::cos(t * freq);
  }
  return emb;
}

ForwardHandles build_forward(Tape &tape, const DenoiserConfig &cfg,
                             const Parameters &params, const DenoiserBatch &in) {
  cfg.validate();
  const int batch = in.batch;
  const auto l = static_cast<std::size_t>(cfg.max_len);
  const auto cd = static_cast<std::size_t>(cfg.cond_dim);
  if (in.tokens.size() != static_cast<std::size_t>(batch) * l ||
      in.times.size() != static_cast<std::size_t>(batch) ||
      in.drop.size() != static_cast<std::size_t>(batch)) {
    throw Error("build_forward: batch shape mismatch");
  }
  for (double t : in.times) {
    if (!(t >= 0.0) || t >= 1.0) {
      throw Error("build_forward: t must lie in [0, 1)");
    }
  }

  ForwardHandles handles;
  std::map<std::string, int> ids;
  for (const auto &[name, tensor] : params.items) {
    const int id = tape.input(tensor, true);
    ids[name] = id;
    handles.param_ids.emplace_back(name, id);
  }
  auto pid = [&](const std::string &name) { return ids.at(name); };

  // Token + position embeddings.
  const int emb = tape.gather_rows(pid("tok_emb"), in.tokens);
  int h = tape.add_position_rows(emb, pid("pos_emb"), batch);

  // Conditioning vector c = MLP(concat(time features, projected condition)).
  Tensor cond_rows({static_cast<std::size_t>(batch), cd});
  if (!in.conditions.empty()) {
    if (in.conditions.size() != static_cast<std::size_t>(batch) * cd) {
      throw Error("build_forward: condition shape mismatch");
    }
    cond_rows.data = in.conditions;
  }
  const int cond_sel = tape.select_condition(std::move(cond_rows),
                                             pid("cond_null"), in.drop);
  const int cond_proj = tape.linear(cond_sel, pid("cond_proj_w"), pid("cond_proj_b"));
  Tensor time_rows({static_cast<std::size_t>(batch),
                    static_cast<std::size_t>(kTimeEmbedDim)});
  for (int b = 0; b < batch; ++b) {
    const auto emb_t = time_embedding(in.times[static_cast<std::size_t>(b)]);
    std::copy(emb_t.begin(), emb_t.end(),
              time_rows.data.begin() +
                  static_cast<std::size_t>(b) * kTimeEmbedDim);
  }
  const int time_in = tape.input(std::move(time_rows), false);
  const int cat = tape.concat_cols(time_in, cond_proj);
  const int mlp1 = tape.gelu(tape.linear(cat, pid("time_mlp_w1"), pid("time_mlp_b1")));
  const int cond = tape.linear(mlp1, pid("time_mlp_w2"), pid("time_mlp_b2"));

  auto adaln = [&](int x, const std::string &prefix) {
    const int s = tape.linear(cond, pid(prefix + "_sw"), pid(prefix + "_sb"));
    const int sh = tape.linear(cond, pid(prefix + "_bw"), pid(prefix + "_bb"));
    const int ln = tape.layer_norm(x);
    return tape.modulate_rows(ln, s, sh, cfg.max_len);
  };

  for (int blk = 0; blk < cfg.n_layers; ++blk) {
    const std::string b = "blk" + std::to_string(blk) + "_";
    const int mod1 = adaln(h, b + "adaln1");
    const int att = tape.self_attention(
        mod1, pid(b + "attn_wq"), pid(b + "attn_bq"), pid(b + "attn_wk"),
        pid(b + "attn_bk"), pid(b + "attn_wv"), pid(b + "attn_bv"),
        pid(b + "attn_wo"), pid(b + "attn_bo"), batch, cfg.max_len, cfg.n_heads);
    h = tape.add(h, att);
    const int mod2 = adaln(h, b + "adaln2");
    const int ff1 = tape.gelu(tape.linear(mod2, pid(b + "ffn_w1"), pid(b + "ffn_b1")));
    const int ff2 = tape.linear(ff1, pid(b + "ffn_w2"), pid(b + "ffn_b2"));
    h = tape.add(h, ff2);
  }

  const int final_mod = adaln(h, "final_adaln");
  handles.logits = tape.linear(final_mod, pid("head_w"), pid("head_b"));
  return handles;
}

void denoiser_logits(const DenoiserConfig &cfg, const Parameters &params,
                     const std::vector<TokenSeq> &batch, double t,
                     const std::vector<double> *condition,
                     std::vector<double> &out) {
  const int b = static_cast<int>(batch.size());
  DenoiserBatch in;
  in.batch = b;
  in.tokens.reserve(static_cast<std::size_t>(b) * cfg.max_len);
  for (const auto &seq : batch) {
    if (static_cast<int>(seq.ids.size()) != cfg.max_len) {
      throw Error("denoiser_logits: sequence length mismatch");
    }
    in.tokens.insert(in.tokens.end(), seq.ids.begin(), seq.ids.end());
  }
  in.times.assign(static_cast<std::size_t>(b), t);
  if (condition != nullptr) {
    if (static_cast<int>(condition->size()) != cfg.cond_dim) {
      throw Error("denoiser_logits: condition dimension mismatch");
    }
    in.conditions.reserve(static_cast<std::size_t>(b) * condition->size());
    for (int i = 0; i < b; ++i) {
      in.conditions.insert(in.conditions.end(), condition->begin(), condition->end());
    }
    in.drop.assign(static_cast<std::size_t>(b), 0);
  } else {
    in.drop.assign(static_cast<std::size_t>(b), 1);
  }

  Tape tape(/*recording=*/false);
  const ForwardHandles handles = build_forward(tape, cfg, params, in);
  out = tape.value(handles.logits).data;
  for (double v : out) {
    if (!std::isfinite(v)) {
      throw NumericError("denoiser produced non-finite logits");
    }
  }
}

void adam_step(Parameters &params, const std::vector<Tensor> &grads,
               AdamState &state, double lr, double beta1, double beta2,
               double eps) {
  if (grads.size() != params.items.size()) {
    throw Error("adam_step: gradient count mismatch");
  }
  if (state.m.empty()) {
    state.m.reserve(params.items.size());
    state.v.reserve(params.items.size());
    for (const auto &[name, t] : params.items) {
      state.m.emplace_back(t.dims);
      state.v.emplace_back(t.dims);
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    Tensor &p = params.items[i].second;
    const Tensor &g = grads[i];
    if (!p.same_shape(g)) {
      throw Error("adam_step: gradient shape mismatch for " + params.items[i].first);
    }
    Tensor &m = state.m[i];
    Tensor &v = state.v[i];
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      m.data[j] = beta1 * m.data[j] + (1.0 - beta1) * g.data[j];
      v.data[j] = beta2 * v.data[j] + (1.0 - beta2) * g.data[j] * g.data[j];
      const double mhat = m.data[j] / bc1;
      const double vhat = v.data[j] / bc2;
      p.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace safeflow
