//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/flow.hpp"

#include <algorithm>
#include <cmath>

namespace safeflow {

namespace {

void check_posterior_row(std::span<const double> row) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0)) {
      throw Error("posterior row has a negative or non-finite entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error("posterior row does not sum to 1");
  }
}

// Sample from a probability vector: first index whose cumulative sum
// exceeds the uniform draw.
int sample_categorical(std::span<const double> probs, Rng &rng) {
  const double u = rng.next_double();
  double cum = 0.0;
  for (int k = 0; k < static_cast<int>(probs.size()); ++k) {
    cum += probs[static_cast<std::size_t>(k)];
    if (u < cum) {
      return k;
    }
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

TokenSeq interpolate(const TokenSeq &x0, const TokenSeq &x1, double t, Rng &rng) {
  if (x0.ids.size() != x1.ids.size()) {
    throw Error("interpolate: length mismatch");
  }
  if (!(t >= 0.0) || t >= 1.0) {
    throw Error("interpolate: t must lie in [0, 1)");
  }
  TokenSeq out;
  out.ids.resize(x0.ids.size());
  for (std::size_t k = 0; k < x0.ids.size(); ++k) {
    out.ids[k] = rng.next_double() < t ? x1.ids[k] : x0.ids[k];
  }
  return out;
}

std::vector<double> velocity_from_posterior(std::span<const double> row,
                                            int current, double t) {
  if (t >= 1.0) {
    throw Error("velocity is undefined at t >= 1");
  }
  if (current < 0 || current >= static_cast<int>(row.size())) {
    throw Error("velocity: current token out of range");
  }
  const double inv = 1.0 / (1.0 - t);
  std::vector<double> u(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) {
    const double delta = static_cast<int>(k) == current ? 1.0 : 0.0;
    u[k] = (row[k] - delta) * inv;
  }
  return u;
}

TokenSeq euler_step(const TokenSeq &x_t, const Posterior &posterior, double t,
                    double dt, Rng &rng) {
  if (posterior.length != static_cast<int>(x_t.ids.size())) {
    throw Error("euler_step: posterior length mismatch");
  }
  if (dt > 1.0 - t + 1e-15) {
    throw Error("euler_step: dt exceeds 1 - t");
  }
  const double lambda = dt / (1.0 - t);
  TokenSeq out;
  out.ids.resize(x_t.ids.size());
  std::vector<double> probs(static_cast<std::size_t>(posterior.vocab));
  for (int pos = 0; pos < posterior.length; ++pos) {
    const auto row = posterior.row(pos);
    check_posterior_row(row);
    const int c = x_t.ids[static_cast<std::size_t>(pos)];
    if (c < 0 || c >= posterior.vocab) {
      throw Error("euler_step: current token out of range");
    }
    // onehot(c) + dt * u collapses to a lerp toward the posterior row.
    for (int k = 0; k < posterior.vocab; ++k) {
      probs[static_cast<std::size_t>(k)] = lambda * row[static_cast<std::size_t>(k)];
    }
    probs[static_cast<std::size_t>(c)] += 1.0 - lambda;
    out.ids[static_cast<std::size_t>(pos)] = sample_categorical(probs, rng);
  }
  return out;
}

std::vector<double> cfg_combine(const std::vector<double> &cond_logits,
                                const std::vector<double> &uncond_logits,
                                double w) {
  if (cond_logits.size() != uncond_logits.size()) {
    throw Error("cfg_combine: shape mismatch");
  }
  if (w == 1.0) {
    return cond_logits;
  }
  if (w == 0.0) {
    return uncond_logits;
  }
  std::vector<double> out(cond_logits.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = uncond_logits[k] + w * (cond_logits[k] - uncond_logits[k]);
  }
  return out;
}

Posterior posterior_from_logits(std::span<const double> logits, int length, int vocab) {
  if (static_cast<std::size_t>(length) * vocab != logits.size()) {
    throw Error("posterior_from_logits: shape mismatch");
  }
  Posterior p;
  p.length = length;
  p.vocab = vocab;
  p.probs.resize(logits.size());
  for (int pos = 0; pos < length; ++pos) {
    const double *in = logits.data() + static_cast<std::size_t>(pos) * vocab;
    double *out = p.probs.data() + static_cast<std::size_t>(pos) * vocab;
    double mx = in[0];
    for (int k = 1; k < vocab; ++k) {
      mx = std::max(mx, in[k]);
    }
    double sum = 0.0;
    for (int k = 0; k < vocab; ++k) {
      out[k] = std::exp(in[k] - mx);
      sum += out[k];
    }
    for (int k = 0; k < vocab; ++k) {
      out[k] /= sum;
    }
  }
  return p;
}

double ce_loss(std::span<const double> logits, const TokenSeq &x1, int vocab) {
  const int length = static_cast<int>(x1.ids.size());
  if (static_cast<std::size_t>(length) * vocab != logits.size()) {
    throw Error("ce_loss: shape mismatch");
  }
  double loss = 0.0;
  for (int pos = 0; pos < length; ++pos) {
    const double *row = logits.data() + static_cast<std::size_t>(pos) * vocab;
    const int target = x1.ids[static_cast<std::size_t>(pos)];
    if (target < 0 || target >= vocab) {
      throw Error("ce_loss: target token out of range");
    }
    double mx = row[0];
    for (int k = 1; k < vocab; ++k) {
      mx = std::max(mx, row[k]);
    }
    double sum = 0.0;
    for (int k = 0; k < vocab; ++k) {
      sum += std::exp(row[k] - mx);
    }
    loss += mx + std::log(sum) - row[target];
  }
  return loss;
}

std::vector<TokenSeq> sample_streams(const BatchDenoiserFn &denoiser,
                                     const std::vector<double> *condition,
                                     const SamplerConfig &cfg, int length,
                                     int vocab,
                                     const std::vector<std::uint64_t> &stream_ids) {
  if (cfg.steps < 1) {
    throw Error("sampler steps must be >= 1");
  }
  const int batch = static_cast<int>(stream_ids.size());
  std::vector<Rng> rngs;
  rngs.reserve(stream_ids.size());
  for (std::uint64_t sid : stream_ids) {
    rngs.emplace_back(cfg.seed, sid);
  }

  // Uniform prior over the vocabulary, one draw per position.
  std::vector<TokenSeq> xs(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    xs[static_cast<std::size_t>(b)].ids.resize(static_cast<std::size_t>(length));
    for (int pos = 0; pos < length; ++pos) {
      xs[static_cast<std::size_t>(b)].ids[static_cast<std::size_t>(pos)] =
          rngs[static_cast<std::size_t>(b)].next_below(vocab);
    }
  }

  const double dt = 1.0 / cfg.steps;
  std::vector<double> cond_logits;
  std::vector<double> uncond_logits;
  const std::size_t per_seq = static_cast<std::size_t>(length) * vocab;

  for (int n = 0; n < cfg.steps; ++n) {
    const double t = static_cast<double>(n) / cfg.steps;
    const std::vector<double> *guided = nullptr;
    std::vector<double> combined;
    if (condition == nullptr) {
      denoiser(xs, t, nullptr, uncond_logits);
      guided = &uncond_logits;
    } else if (cfg.guidance == 1.0) {
      denoiser(xs, t, condition, cond_logits);
      guided = &cond_logits;
    } else if (cfg.guidance == 0.0) {
      denoiser(xs, t, nullptr, uncond_logits);
      guided = &uncond_logits;
    } else {
      denoiser(xs, t, condition, cond_logits);
      denoiser(xs, t, nullptr, uncond_logits);
      combined = cfg_combine(cond_logits, uncond_logits, cfg.guidance);
      guided = &combined;
    }
    for (int b = 0; b < batch; ++b) {
      const Posterior post = posterior_from_logits(
          std::span<const double>(guided->data() + static_cast<std::size_t>(b) * per_seq,
                                  per_seq),
          length, vocab);
      xs[static_cast<std::size_t>(b)] =
          euler_step(xs[static_cast<std::size_t>(b)], post, t, dt,
                     rngs[static_cast<std::size_t>(b)]);
    }
  }
  return xs;
}

TokenSeq sample_sequence(const DenoiserFn &denoiser,
                         const std::vector<double> *condition,
                         const SamplerConfig &cfg, int length, int vocab,
                         std::uint64_t stream_id) {
  BatchDenoiserFn batched = [&](const std::vector<TokenSeq> &batch, double t,
                                const std::vector<double> *cond,
                                std::vector<double> &logits_out) {
    logits_out.clear();
    std::vector<double> one;
    for (const auto &x : batch) {
      denoiser(x, t, cond, one);
      logits_out.insert(logits_out.end(), one.begin(), one.end());
    }
  };
  return sample_streams(batched, condition, cfg, length, vocab, {stream_id}).front();
}

}  // namespace safeflow
