//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "safeflow/tensor.hpp"

namespace safeflow {

// Minimal reverse-mode autodiff over a dynamic tape. Each op appends a
// value slot plus a backward closure; backward() walks the closures in
// reverse, accumulating into the grad tensors of slots that require them.
//
// Every op computes each output row from its own input rows only, with a
// fixed per-element accumulation order. Results are therefore independent
// of how rows are batched, which the sampler's worker-determinism
// contract relies on.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) { }

  int input(Tensor value, bool requires_grad = false);

  const Tensor &value(int id) const { return slots_[static_cast<std::size_t>(id)].value; }
  const Tensor &grad(int id) const { return slots_[static_cast<std::size_t>(id)].grad; }
  bool requires_grad(int id) const { return slots_[static_cast<std::size_t>(id)].requires_grad; }
  bool recording() const { return recording_; }

  // table: R x D, ids: N entries in [0, R) -> N x D.
  int gather_rows(int table, std::vector<int> ids);

  // Elementwise sum of two same-shape tensors.
  int add(int a, int b);

  // x: (B*L) x D plus a positional table L x D broadcast over the batch.
  int add_position_rows(int x, int pos, int batch);

  // a: N x P, b: N x Q -> N x (P+Q).
  int concat_cols(int a, int b);

  // x: N x P, w: P x Q, bias: 1 x Q -> N x Q.
  int linear(int x, int w, int bias);

  // Exact GELU, x * Phi(x) with the error-function form.
  int gelu(int x);

  // Row-wise layer normalization (mean 0, variance 1, eps 1e-5).
  int layer_norm(int x);

  // out[b*L+l] = xhat[b*L+l] * scale[b] + shift[b] (per-sample modulation).
  int modulate_rows(int xhat, int scale, int shift, int seq_len);

  // Bidirectional multi-head self-attention over B sequences of length L.
  // x: (B*L) x D; weight matrices D x D with 1 x D biases.
  int self_attention(int x, int wq, int bq, int wk, int bk, int wv, int bv,
                     int wo, int bo, int batch, int seq_len, int heads);

  // Per-row condition selection: rows (B x d, constant) except where
  // use_fallback is set, which substitutes the learned fallback (1 x d).
  int select_condition(Tensor rows, int fallback, std::vector<std::uint8_t> use_fallback);

  // Scalar sum over rows of -log softmax(row)[target].
  int cross_entropy_sum(int logits, std::vector<int> targets);

  int scale(int x, double factor);

  // Seeds d(loss)/d(loss) = 1 and runs all recorded closures in reverse.
  void backward(int loss_id);

 private:
  struct Slot {
    Tensor value;
    Tensor grad;  // allocated only when requires_grad
    bool requires_grad = false;
  };

  int push(Tensor value, bool requires_grad);
  Tensor &grad_mut(int id) { return slots_[static_cast<std::size_t>(id)].grad; }

  std::vector<Slot> slots_;
  std::vector<std::function<void()>> backward_ops_;
  bool recording_;
};

}  // namespace safeflow
