//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "safeflow/rng.hpp"
#include "safeflow/tape.hpp"
#include "safeflow/tensor.hpp"
#include "safeflow/vocab.hpp"

namespace safeflow {

// Width of the sinusoidal time embedding fed into the conditioning MLP.
inline constexpr int kTimeEmbedDim = 128;

struct DenoiserConfig {
  int d_model = 128;
  int n_layers = 4;
  int n_heads = 4;
  int d_ff = 512;
  int vocab_size = 0;
  int max_len = 0;
  int cond_dim = 0;

  void validate() const;
  std::map<std::string, std::string> to_kv() const;
  static DenoiserConfig from_kv(const std::map<std::string, std::string> &kv);
};

// Named tensors in a fixed construction order; the order drives both
// deterministic initialization and the checkpoint layout.
struct Parameters {
  std::vector<std::pair<std::string, Tensor>> items;

  Tensor &at(const std::string &name);
  const Tensor &at(const std::string &name) const;
  std::size_t scalar_count() const;
};

// Gaussian(0, 0.02) weights, zero biases; AdaLN scale maps initialized to
// the constant 1 and shift maps to 0, so a fresh model applies plain
// LayerNorm and its conditional/unconditional outputs coincide.
Parameters init_parameters(const DenoiserConfig &cfg, Rng &rng);

// 128-dim sinusoidal features of t.
std::vector<double> time_embedding(double t);

struct DenoiserBatch {
  std::vector<int> tokens;          // batch x max_len
  std::vector<double> times;        // batch
  std::vector<double> conditions;   // batch x cond_dim (ignored where dropped)
  std::vector<std::uint8_t> drop;   // batch; 1 = use the learned null vector
  int batch = 0;
};

struct ForwardHandles {
  int logits = -1;  // (batch * max_len) x vocab
  std::vector<std::pair<std::string, int>> param_ids;
};

// Records the full forward pass on the tape. Embed tokens and positions;
// form the conditioning vector from sinusoidal time features and the
// (possibly dropped) projected condition; run the AdaLN-modulated
// attention/feed-forward blocks; finish with AdaLN and the output head.
ForwardHandles build_forward(Tape &tape, const DenoiserConfig &cfg,
                             const Parameters &params, const DenoiserBatch &in);

// Inference-only logits for a batch sharing one t and one condition
// (nullptr = unconditional). Output is batch x max_len x vocab, row-major.
void denoiser_logits(const DenoiserConfig &cfg, const Parameters &params,
                     const std::vector<TokenSeq> &batch, double t,
                     const std::vector<double> *condition,
                     std::vector<double> &out);

struct AdamState {
  long long step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// Adam with bias correction, applied tensor-by-tensor in parameter order.
void adam_step(Parameters &params, const std::vector<Tensor> &grads,
               AdamState &state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

}  // namespace safeflow
