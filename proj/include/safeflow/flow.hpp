//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "safeflow/error.hpp"
#include "safeflow/rng.hpp"
#include "safeflow/vocab.hpp"

namespace safeflow {

// Per-position distribution over clean tokens, row-major length x vocab.
struct Posterior {
  int length = 0;
  int vocab = 0;
  std::vector<double> probs;

  std::span<const double> row(int pos) const {
    return {probs.data() + static_cast<std::size_t>(pos) * vocab,
            static_cast<std::size_t>(vocab)};
  }
};

struct SamplerConfig {
  int steps = 50;                  // uniform grid, dt = 1/steps
  double guidance = 1.5;           // w; 1 = conditional, 0 = unconditional
  int samples_per_condition = 100;
  std::uint64_t seed = 0;
};

// Per position: keep the clean token with probability t, else the prior
// token. One uniform draw per position, in position order.
TokenSeq interpolate(const TokenSeq &x0, const TokenSeq &x1, double t, Rng &rng);

// Probability-denoiser velocity: u = (row - onehot(current)) / (1 - t).
// Components sum to zero; everything off the current state is >= 0.
std::vector<double> velocity_from_posterior(std::span<const double> row,
                                            int current, double t);

// One Euler update: per position, sample the next token from
// onehot(current) + dt * velocity. Requires dt <= 1 - t, which keeps the
// transition vector a distribution; on the uniform grid this holds at
// every step by construction.
TokenSeq euler_step(const TokenSeq &x_t, const Posterior &posterior, double t,
                    double dt, Rng &rng);

// Classifier-free guidance in logit space: uncond + w * (cond - uncond),
// elementwise. w = 1 returns the conditional logits exactly; w = 0 the
// unconditional ones.
std::vector<double> cfg_combine(const std::vector<double> &cond_logits,
                                const std::vector<double> &uncond_logits,
                                double w);

// Row-wise softmax of length x vocab logits into a Posterior.
Posterior posterior_from_logits(std::span<const double> logits, int length, int vocab);

// Cross-entropy summed over all positions (pads included).
double ce_loss(std::span<const double> logits, const TokenSeq &x1, int vocab);

// Batched denoiser evaluations share one (t, condition) across rows;
// logits_out receives batch * length * vocab values, row-major. A null
// condition pointer selects the unconditional (null-vector) path.
using BatchDenoiserFn = std::function<void(
    const std::vector<TokenSeq> &batch, double t,
    const std::vector<double> *condition, std::vector<double> &logits_out)>;

// Runs `stream_ids.size()` sequences in lockstep from the uniform prior
// through `steps` Euler updates with classifier-free guidance. Each
// sequence consumes randomness only from its own (seed, stream) generator,
// so any partition of streams across calls or threads reproduces the same
// sequences bit for bit.
std::vector<TokenSeq> sample_streams(const BatchDenoiserFn &denoiser,
                                     const std::vector<double> *condition,
                                     const SamplerConfig &cfg, int length,
                                     int vocab,
                                     const std::vector<std::uint64_t> &stream_ids);

// Single-sequence convenience wrapper: stream 0 of the config seed.
using DenoiserFn = std::function<void(const TokenSeq &x, double t,
                                      const std::vector<double> *condition,
                                      std::vector<double> &logits_out)>;

TokenSeq sample_sequence(const DenoiserFn &denoiser,
                         const std::vector<double> *condition,
                         const SamplerConfig &cfg, int length, int vocab,
                         std::uint64_t stream_id = 0);

}  // namespace safeflow
