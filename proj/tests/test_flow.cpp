//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "safeflow/flow.hpp"
#include "safeflow/rng.hpp"

using namespace safeflow;

namespace {

Posterior uniform_posterior(int length, int vocab) {
  Posterior p;
  p.length = length;
  p.vocab = vocab;
  p.probs.assign(static_cast<std::size_t>(length) * vocab, 1.0 / vocab);
  return p;
}

Posterior onehot_posterior(const TokenSeq &x, int vocab) {
  Posterior p;
  p.length = static_cast<int>(x.ids.size());
  p.vocab = vocab;
  p.probs.assign(static_cast<std::size_t>(p.length) * vocab, 0.0);
  for (int pos = 0; pos < p.length; ++pos) {
    p.probs[static_cast<std::size_t>(pos) * vocab +
            static_cast<std::size_t>(x.ids[static_cast<std::size_t>(pos)])] = 1.0;
  }
  return p;
}

}  // namespace

TEST_CASE("interpolate endpoints") {
  Rng rng(1);
  TokenSeq x0;
  TokenSeq x1;
  x0.ids = {0, 1, 2, 3, 4};
  x1.ids = {4, 3, 2, 1, 0};
  CHECK(interpolate(x0, x1, 0.0, rng).ids == x0.ids);
  CHECK(interpolate(x0, x1, 1.0 - 1e-12, rng).ids == x1.ids);
  TokenSeq bad;
  bad.ids = {0};
  CHECK_THROWS_AS(interpolate(x0, bad, 0.5, rng), Error);
  CHECK_THROWS_AS(interpolate(x0, x1, 1.0, rng), Error);
}

TEST_CASE("corruption marginal matches t + (1-t)/K within three sigma") {
  const int kVocab = 10;
  const int kPositions = 100000;
  Rng rng(20240501);
  for (double t : {0.1, 0.3, 0.5, 0.9}) {
    TokenSeq x0;
    TokenSeq x1;
    x0.ids.resize(kPositions);
    x1.ids.resize(kPositions);
    for (int i = 0; i < kPositions; ++i) {
      x0.ids[static_cast<std::size_t>(i)] = rng.next_below(kVocab);
      x1.ids[static_cast<std::size_t>(i)] = rng.next_below(kVocab);
    }
    const TokenSeq xt = interpolate(x0, x1, t, rng);
    int matches = 0;
    for (int i = 0; i < kPositions; ++i) {
      matches += xt.ids[static_cast<std::size_t>(i)] == x1.ids[static_cast<std::size_t>(i)];
    }
    const double expect = t + (1.0 - t) / kVocab;
    const double sigma = std::sqrt(expect * (1.0 - expect) / kPositions);
    CAPTURE(t);
    CHECK(std::abs(static_cast<double>(matches) / kPositions - expect) <= 3.0 * sigma);
  }
}

TEST_CASE("velocity from posterior") {
  SUBCASE("worked example") {
    const std::vector<double> row = {0.2, 0.3, 0.5};
    const auto u = velocity_from_posterior(row, 0, 0.5);
    CHECK(u[0] == doctest::Approx(-1.6));
    CHECK(u[1] == doctest::Approx(0.6));
    CHECK(u[2] == doctest::Approx(1.0));
  }
  SUBCASE("absorbing fixed point") {
    const std::vector<double> row = {0.0, 1.0, 0.0};
    const auto u = velocity_from_posterior(row, 1, 0.25);
    for (double v : u) {
      CHECK(v == 0.0);
    }
  }
  SUBCASE("t = 0 leaves the difference unscaled") {
    const std::vector<double> row = {0.7, 0.1, 0.2};
    const auto u = velocity_from_posterior(row, 2, 0.0);
    CHECK(u[0] == doctest::Approx(0.7));
    CHECK(u[1] == doctest::Approx(0.1));
    CHECK(u[2] == doctest::Approx(-0.8));
  }
  SUBCASE("t >= 1 is rejected") {
    const std::vector<double> row = {1.0};
    CHECK_THROWS_AS(velocity_from_posterior(row, 0, 1.0), Error);
  }
}

TEST_CASE("velocity conservation and sign structure on random inputs") {
  Rng rng(77);
  for (int trial = 0; trial < 10000; ++trial) {
    const int vocab = 2 + rng.next_below(12);
    std::vector<double> row(static_cast<std::size_t>(vocab));
    double sum = 0.0;
    for (auto &p : row) {
      p = rng.next_double() + 1e-12;
      sum += p;
    }
    for (auto &p : row) {
      p /= sum;
    }
    const int current = rng.next_below(vocab);
    const double t = rng.next_double() * 0.999;
    const auto u = velocity_from_posterior(row, current, t);
    const double total = std::accumulate(u.begin(), u.end(), 0.0);
    CHECK(std::abs(total) < 1e-9);
    for (int k = 0; k < vocab; ++k) {
      if (k != current) {
        CHECK(u[static_cast<std::size_t>(k)] >= 0.0);
      }
    }
  }
}

TEST_CASE("euler step") {
  SUBCASE("worked transition distribution") {
    // Posterior row (0.2, 0.3, 0.5), current 0, t = 0.5, dt = 0.25
    // gives onehot + dt*u = (0.6, 0.15, 0.25).
    Posterior p;
    p.length = 1;
    p.vocab = 3;
    p.probs = {0.2, 0.3, 0.5};
    TokenSeq x;
    x.ids = {0};
    int counts[3] = {0, 0, 0};
    Rng rng(9);
    const int kTrials = 200000;
    for (int trial = 0; trial < kTrials; ++trial) {
      const TokenSeq next = euler_step(x, p, 0.5, 0.25, rng);
      ++counts[next.ids[0]];
    }
    CHECK(static_cast<double>(counts[0]) / kTrials == doctest::Approx(0.60).epsilon(0.02));
    CHECK(static_cast<double>(counts[1]) / kTrials == doctest::Approx(0.15).epsilon(0.05));
    CHECK(static_cast<double>(counts[2]) / kTrials == doctest::Approx(0.25).epsilon(0.03));
  }
  SUBCASE("degenerate posterior keeps the token") {
    TokenSeq x;
    x.ids = {2, 0, 1};
    const Posterior p = onehot_posterior(x, 3);
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
      CHECK(euler_step(x, p, 0.3, 0.1, rng).ids == x.ids);
    }
  }
  SUBCASE("dt beyond 1 - t is rejected") {
    TokenSeq x;
    x.ids = {0};
    Rng rng(2);
    CHECK_THROWS_AS(euler_step(x, uniform_posterior(1, 3), 0.9, 0.2, rng), Error);
  }
  SUBCASE("invalid posterior row is rejected") {
    TokenSeq x;
    x.ids = {0};
    Posterior p;
    p.length = 1;
    p.vocab = 3;
    p.probs = {0.5, 0.2, 0.2};  // sums to 0.9
    Rng rng(2);
    CHECK_THROWS_AS(euler_step(x, p, 0.1, 0.1, rng), Error);
  }
}

TEST_CASE("euler transition vector stays on the simplex across uniform grids") {
  Rng rng(123);
  for (int steps : {1, 2, 10, 50}) {
    for (int n = 0; n < steps; ++n) {
      const double t = static_cast<double>(n) / steps;
      const double dt = 1.0 / steps;
      const double lambda = dt / (1.0 - t);
      // Random row; the transition vector is lambda*row + (1-lambda)*onehot.
      const int vocab = 2 + rng.next_below(10);
      std::vector<double> row(static_cast<std::size_t>(vocab));
      double sum = 0.0;
      for (auto &p : row) {
        p = rng.next_double();
        sum += p;
      }
      for (auto &p : row) {
        p /= sum;
      }
      const int current = rng.next_below(vocab);
      double total = 0.0;
      for (int k = 0; k < vocab; ++k) {
        double prob = lambda * row[static_cast<std::size_t>(k)];
        if (k == current) {
          prob += 1.0 - lambda;
        }
        CHECK(prob >= 0.0);
        total += prob;
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("terminal grid step reduces to the posterior row") {
  const int steps = 50;
  const double t = static_cast<double>(steps - 1) / steps;
  const double dt = 1.0 / steps;
  const double lambda = dt / (1.0 - t);
  const std::vector<double> row = {0.05, 0.7, 0.2, 0.05};
  for (int k = 0; k < 4; ++k) {
    double prob = lambda * row[static_cast<std::size_t>(k)];
    if (k == 1) {
      prob += 1.0 - lambda;
    }
    CHECK(std::abs(prob - row[static_cast<std::size_t>(k)]) < 1e-12);
  }
}

TEST_CASE("cfg_combine") {
  const std::vector<double> cond = {1.0, -1.0};
  const std::vector<double> uncond = {0.0, 0.0};
  CHECK(cfg_combine(cond, uncond, 1.0) == cond);
  CHECK(cfg_combine(cond, uncond, 0.0) == uncond);
  const auto two = cfg_combine(cond, uncond, 2.0);
  CHECK(two == std::vector<double>{2.0, -2.0});
  CHECK_THROWS_AS(cfg_combine(cond, {0.0}, 1.5), Error);
}

TEST_CASE("ce_loss") {
  SUBCASE("half-probability tokens") {
    // Two positions, two classes, logits giving p = 0.5 each.
    const std::vector<double> logits = {0.3, 0.3, -1.0, -1.0};
    TokenSeq x;
    x.ids = {0, 1};
    CHECK(ce_loss(logits, x, 2) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("uniform logits give L log K") {
    const int length = 7;
    const int vocab = 13;
    const std::vector<double> logits(static_cast<std::size_t>(length) * vocab, 0.42);
    TokenSeq x;
    for (int i = 0; i < length; ++i) {
      x.ids.push_back(i % vocab);
    }
    CHECK(ce_loss(logits, x, vocab) ==
          doctest::Approx(length * std::log(vocab)).epsilon(1e-12));
  }
  SUBCASE("confident correct logits drive the loss to zero") {
    std::vector<double> logits = {30.0, 0.0, 0.0};
    TokenSeq x;
    x.ids = {0};
    CHECK(ce_loss(logits, x, 3) < 1e-12);
  }
}

TEST_CASE("ce_loss gradient equals softmax minus onehot") {
  const int length = 3;
  const int vocab = 5;
  Rng rng(31);
  std::vector<double> logits(static_cast<std::size_t>(length) * vocab);
  for (auto &v : logits) {
    v = rng.next_gaussian();
  }
  TokenSeq x;
  x.ids = {4, 0, 2};

  // Analytic gradient.
  std::vector<double> analytic(logits.size());
  for (int pos = 0; pos < length; ++pos) {
    double mx = -1e300;
    for (int k = 0; k < vocab; ++k) {
      mx = std::max(mx, logits[static_cast<std::size_t>(pos * vocab + k)]);
    }
    double sum = 0.0;
    for (int k = 0; k < vocab; ++k) {
      sum += std::exp(logits[static_cast<std::size_t>(pos * vocab + k)] - mx);
    }
    for (int k = 0; k < vocab; ++k) {
      const double soft = std::exp(logits[static_cast<std::size_t>(pos * vocab + k)] - mx) / sum;
      analytic[static_cast<std::size_t>(pos * vocab + k)] =
          soft - (x.ids[static_cast<std::size_t>(pos)] == k ? 1.0 : 0.0);
    }
  }

  const double h = 1e-5;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    std::vector<double> plus = logits;
    std::vector<double> minus = logits;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (ce_loss(plus, x, vocab) - ce_loss(minus, x, vocab)) / (2.0 * h);
    CHECK(std::abs(fd - analytic[i]) < 1e-10);
  }
}

TEST_CASE("sampling with a stub denoiser") {
  const int length = 6;
  const int vocab = 4;

  SUBCASE("degenerate posterior pins the prior draw") {
    // Logits that put all mass on the current token at every position.
    DenoiserFn stub = [&](const TokenSeq &x, double, const std::vector<double> *,
                          std::vector<double> &out) {
      out.assign(static_cast<std::size_t>(length) * vocab, -100.0);
      for (int pos = 0; pos < length; ++pos) {
        out[static_cast<std::size_t>(pos) * vocab +
            static_cast<std::size_t>(x.ids[static_cast<std::size_t>(pos)])] = 100.0;
      }
    };
    SamplerConfig cfg;
    cfg.steps = 8;
    cfg.guidance = 1.0;
    cfg.seed = 99;
    const TokenSeq out = sample_sequence(stub, nullptr, cfg, length, vocab);
    Rng prior(99, 0);
    for (int pos = 0; pos < length; ++pos) {
      CHECK(out.ids[static_cast<std::size_t>(pos)] == prior.next_below(vocab));
    }
  }

  SUBCASE("T = 1 draws directly from the guided posterior") {
    // Posterior concentrated on token 2 everywhere.
    DenoiserFn stub = [&](const TokenSeq &, double, const std::vector<double> *,
                          std::vector<double> &out) {
      out.assign(static_cast<std::size_t>(length) * vocab, -50.0);
      for (int pos = 0; pos < length; ++pos) {
        out[static_cast<std::size_t>(pos) * vocab + 2] = 50.0;
      }
    };
    SamplerConfig cfg;
    cfg.steps = 1;
    cfg.guidance = 1.0;
    cfg.seed = 7;
    const TokenSeq out = sample_sequence(stub, nullptr, cfg, length, vocab);
    for (int id : out.ids) {
      CHECK(id == 2);
    }
  }

  SUBCASE("fixed seed reproduces bit-identical output") {
    DenoiserFn stub = [&](const TokenSeq &, double t, const std::vector<double> *,
                          std::vector<double> &out) {
      out.assign(static_cast<std::size_t>(length) * vocab, 0.0);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::sin(static_cast<double>(i) + t);
      }
    };
    SamplerConfig cfg;
    cfg.steps = 5;
    cfg.guidance = 1.0;
    cfg.seed = 1234;
    const TokenSeq a = sample_sequence(stub, nullptr, cfg, length, vocab);
    const TokenSeq b = sample_sequence(stub, nullptr, cfg, length, vocab);
    CHECK(a.ids == b.ids);
  }

  SUBCASE("batched streams equal one-at-a-time sampling") {
    std::vector<double> cond = {0.5, -0.25};
    BatchDenoiserFn stub = [&](const std::vector<TokenSeq> &batch, double t,
                               const std::vector<double> *condition,
                               std::vector<double> &out) {
      out.assign(batch.size() * length * vocab, 0.0);
      const double bias = condition == nullptr ? 0.0 : condition->at(0);
      for (std::size_t b = 0; b < batch.size(); ++b) {
        for (int pos = 0; pos < length; ++pos) {
          for (int k = 0; k < vocab; ++k) {
            const double x = static_cast<double>(batch[b].ids[static_cast<std::size_t>(pos)]);
            out[(b * length + static_cast<std::size_t>(pos)) * vocab +
                static_cast<std::size_t>(k)] =
                std::cos(x + t * k) + bias * k;
          }
        }
      }
    };
    SamplerConfig cfg;
    cfg.steps = 4;
    cfg.guidance = 1.5;
    cfg.seed = 5150;
    const auto batch = sample_streams(stub, &cond, cfg, length, vocab, {0, 1, 2, 3, 4});
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto single = sample_streams(stub, &cond, cfg, length, vocab, {s});
      CHECK(single.front().ids == batch[s].ids);
    }
  }
}
