//
// Project safeflow - Copyright 2026 the safeflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "safeflow/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace safeflow {

namespace {

constexpr double kLayerNormEps = 1e-5;

// C (n x m) = A (n x p) @ B (p x m). ikj order: the inner loop is
// contiguous in B and C, and each output element accumulates in a fixed
// k-ascending order regardless of n.
void matmul(const double *a, const double *b, double *c, int n, int p, int m) {
  for (int i = 0; i < n; ++i) {
    double *crow = c + static_cast<std::size_t>(i) * m;
    std::fill(crow, crow + m, 0.0);
    const double *arow = a + static_cast<std::size_t>(i) * p;
    for (int k = 0; k < p; ++k) {
      const double av = arow[k];
      const double *brow = b + static_cast<std::size_t>(k) * m;
      for (int j = 0; j < m; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

// C (n x m) += A (n x p) @ B^T where B is (m x p).
void matmul_nt_acc(const double *a, const double *b, double *c, int n, int p, int m) {
  for (int i = 0; i < n; ++i) {
    const double *arow = a + static_cast<std::size_t>(i) * p;
    double *crow = c + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      const double *brow = b + static_cast<std::size_t>(j) * p;
      double sum = 0.0;
      for (int k = 0; k < p; ++k) {
        sum += arow[k] * brow[k];
      }
      crow[j] += sum;
    }
  }
}

// C (p x m) += A^T @ B where A is (n x p), B is (n x m).
void matmul_tn_acc(const double *a, const double *b, double *c, int n, int p, int m) {
  for (int i = 0; i < n; ++i) {
    const double *arow = a + static_cast<std::size_t>(i) * p;
    const double *brow = b + static_cast<std::size_t>(i) * m;
    for (int k = 0; k < p; ++k) {
      const double av = arow[k];
      double *crow = c + static_cast<std::size_t>(k) * m;
      for (int j = 0; j < m; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

int Tape::push(Tensor value, bool requires_grad) {
  Slot slot;
  slot.value = std::move(value);
  slot.requires_grad = requires_grad && recording_;
  if (slot.requires_grad) {
    slot.grad = Tensor(slot.value.dims);
  }
  slots_.push_back(std::move(slot));
  return static_cast<int>(slots_.size()) - 1;
}

int Tape::input(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad);
}

int Tape::gather_rows(int table, std::vector<int> ids) {
  const Tensor &tab = value(table);
  const std::size_t d = tab.cols();
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int r = ids[i];
    if (r < 0 || static_cast<std::size_t>(r) >= tab.rows()) {
      throw Error("gather_rows: index out of range");
    }
    std::copy_n(tab.data.data() + static_cast<std::size_t>(r) * d, d,
                out.data.data() + i * d);
  }
  const bool rg = requires_grad(table);
  const int id = push(std::move(out), rg);
  if (rg) {
    backward_ops_.push_back([this, table, id, ids = std::move(ids), d] {
      const Tensor &g = grad(id);
      Tensor &tg = grad_mut(table);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        double *dst = tg.data.data() + static_cast<std::size_t>(ids[i]) * d;
        const double *src = g.data.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
          dst[j] += src[j];
        }
      }
    });
  }
  return id;
}

int Tape::add(int a, int b) {
  const Tensor &ta = value(a);
  const Tensor &tb = value(b);
  if (!ta.same_shape(tb)) {
    throw Error("add: shape mismatch");
  }
  Tensor out(ta.dims);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = ta.data[i] + tb.data[i];
  }
  const bool rg = requires_grad(a) || requires_grad(b);
  const int id = push(std::move(out), rg);
  if (rg) {
    backward_ops_.push_back([this, a, b, id] {
      const Tensor &g = grad(id);
      for (int src : {a, b}) {
        if (!requires_grad(src)) {
          continue;
        }
        Tensor &sg = grad_mut(src);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          sg.data[i] += g.data[i];
        }
      }
    });
  }
  return id;
}

int Tape::add_position_rows(int x, int pos, int batch) {
  const Tensor &tx = value(x);
  const Tensor &tp = value(pos);
  const std::size_t d = tx.cols();
  const std::size_t seq = tp.rows();
  if (tp.cols() != d || tx.rows() != static_cast<std::size_t>(batch) * seq) {
    throw Error("add_position_rows: shape mismatch");
  }
  Tensor out(tx.dims);
  for (std::size_t r = 0; r < tx.rows(); ++r) {
    const double *prow = tp.data.data() + (r % seq) * d;
    const double *xrow = tx.data.data() + r * d;
    double *orow = out.data.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      orow[j] = xrow[j] + prow[j];
    }
  }
  const bool rg = requires_grad(x) || requires_grad(pos);
  const int id = push(std::move(out), rg);
  if (rg) {
    backward_ops_.push_back([this, x, pos, id, d, seq] {
      const Tensor &g = grad(id);
      if (requires_grad(x)) {
        Tensor &xg = grad_mut(x);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          xg.data[i] += g.data[i];
        }
      }
      if (requires_grad(pos)) {
        Tensor &pg = grad_mut(pos);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double *dst = pg.data.data() + (r % seq) * d;
          const double *src = g.data.data() + r * d;
          for (std::size_t j = 0; j < d; ++j) {
            dst[j] += src[j];
          }
        }
      }
    });
  }
  return id;
}

int Tape::concat_cols(int a, int b) {
  const Tensor &ta = value(a);
  const Tensor &tb = value(b);
  if (ta.rows() != tb.rows()) {
    throw Error("concat_cols: row mismatch");
  }
  const std::size_t p = ta.cols();
  const std::size_t q = tb.cols();
  Tensor out({ta.rows(), p + q});
  for (std::size_t r = 0; r < ta.rows(); ++r) {
    std::copy_n(ta.data.data() + r * p, p, out.data.data() + r * (p + q));
    std::copy_n(tb.data.data() + r * q, q, out.data.data() + r * (p + q) + p);
  }
  const bool rg = requires_grad(a) || requires_grad(b);
  const int id = push(std::move(out), rg);
  if (rg) {
    backward_ops_.push_back([this, a, b, id, p, q] {
      const Tensor &g = grad(id);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        if (requires_grad(a)) {
          double *dst = grad_mut(a).data.data() + r * p;
          const double *src = g.data.data() + r * (p + q);
          for (std::size_t j = 0; j < p; ++j) {
            dst[j] += src[j];
          }
        }
        if (requires_grad(b)) {
          double *dst = grad_mut(b).data.data() + r * q;
          const double *src = g.data.data() + r * (p + q) + p;
          for (std::size_t j = 0; j < q; ++j) {
            dst[j] += src[j];
          }
        }
      }
    });
  }
  return id;
}

int Tape::linear(int x, int w, int bias) {
  const Tensor &tx = value(x);
  const Tensor &tw = value(w);
  const Tensor &tb = value(bias);
  const int n = static_cast<int>(tx.rows());
  const int p = static_cast<int>(tx.cols());
  const int q = static_cast<int>(tw.cols());
  if (static_cast<int>(tw.rows()) != p || tb.numel() != static_cast<std::size_t>(q)) {
    throw Error("linear: shape mismatch");
  }
  Tensor out({static_cast<std::size_t>(n), static_cast<std::size_t>(q)});
  matmul(tx.data.data(), tw.data.data(), out.data.data(), n, p, q);
  for (int i = 0; i < n; ++i) {
    double *row = out.data.data() + static_cast<std::size_t>(i) * q;
    for (int j = 0; j < q; ++j) {
      row[j] += tb.data[static_cast<std::size_t>(j)];
    }
  }
  const bool rg = requires_grad(x) || requires_grad(w) || requires_grad(bias);
  const int id = push(std::move(out), rg);
  if (rg) {
    backward_ops_.push_back([this, x, w, bias, id, n, p, q] {
      const Tensor &g = grad(id);
      if (requires_grad(x)) {
        matmul_nt_acc(g.data.data(), value(w).data.data(),
                      grad_mut(x).data.data(), n, q, p);
      }
      if (requires_grad(w)) {
        matmul_tn_acc(value(x).data.data(), g.data.data(),
                      grad_mut(w).data.data(), n, p, q);
      }
      if (requires_grad(bias)) {
        Tensor &bg = grad_mut(bias);
        for (int i = 0; i < n; ++i) {
          const double *row = g.data.data() + static_cast<std::size_t>(i) * q;
          for (int j = 0; j < q; ++j) {
            bg.data[static_cast<std::size_t>(j)] += row[j];
          }
        }
      }
    });
  }
  return id;
}

int Tape::gelu(int x) {
  const Tensor &tx = value(x);
  Tensor out(tx.dims);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = gelu_value(tx.data[i]);
  }
  const bool rg = requires_grad(x);
  const int id = push(std::move(out), rg);
  if (rg) {
    backward_ops_.push_back([this, x, id] {
      const Tensor &g = grad(id);
      const Tensor &tx2 = value(x);
      Tensor &xg = grad_mut(x);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        xg.data[i] += g.data[i] * gelu_derivative(tx2.data[i]);
      }
    });
  }
  return id;
}

int Tape::layer_norm(int x) {
  const Tensor &tx = value(x);
  const std::size_t n = tx.rows();
  const std::size_t d = tx.cols();
  Tensor out(tx.dims);
  std::vector<double> invstd(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double *row = tx.data.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      mean += row[j];
    }
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    invstd[r] = inv;
    double *orow = out.data.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      orow[j] = (row[j] - mean) * inv;
    }
  }
  const bool rg = requires_grad(x);
  const int id = push(std::move(out), rg);
  if (rg) {
    backward_ops_.push_back([this, x, id, n, d, invstd = std::move(invstd)] {
      const Tensor &g = grad(id);
      const Tensor &xhat = value(id);
      Tensor &xg = grad_mut(x);
      for (std::size_t r = 0; r < n; ++r) {
        const double *grow = g.data.data() + r * d;
        const double *hrow = xhat.data.data() + r * d;
        double g_mean = 0.0;
        double gh_mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          g_mean += grow[j];
          gh_mean += grow[j] * hrow[j];
        }
        g_mean /= static_cast<double>(d);
        gh_mean /= static_cast<double>(d);
        double *dst = xg.data.data() + r * d;
        for (std::size_t j = 0; j < d; ++j) {
          dst[j] += invstd[r] * (grow[j] - g_mean - hrow[j] * gh_mean);
        }
      }
    });
  }
  return id;
}

int Tape::modulate_rows(int xhat, int scale, int shift, int seq_len) {
  const Tensor &tx = value(xhat);
  const Tensor &ts = value(scale);
  const Tensor &tsh = value(shift);
  const std::size_t d = tx.cols();
  const std::size_t seq = static_cast<std::size_t>(seq_len);
  const std::size_t batch = tx.rows() / seq;
  if (ts.rows() != batch || ts.cols() != d || !ts.same_shape(tsh) ||
      tx.rows() != batch * seq) {
    throw Error("modulate_rows: shape mismatch");
  }
  Tensor out(tx.dims);
  for (std::size_t r = 0; r < tx.rows(); ++r) {
    const std::size_t b = r / seq;
    const double *srow = ts.data.data() + b * d;
    const double *shrow = tsh.data.data() + b * d;
    const double *xrow = tx.data.data() + r * d;
    double *orow = out.data.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      orow[j] = xrow[j] * srow[j] + shrow[j];
    }
  }
  const bool rg = requires_grad(xhat) || requires_grad(scale) || requires_grad(shift);
  const int id = push(std::move(out), rg);
  if (rg) {
    backward_ops_.push_back([this, xhat, scale, shift, id, d, seq] {
      const Tensor &g = grad(id);
      const Tensor &tx2 = value(xhat);
      const Tensor &ts2 = value(scale);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const std::size_t b = r / seq;
        const double *grow = g.data.data() + r * d;
        const double *xrow = tx2.data.data() + r * d;
        const double *srow = ts2.data.data() + b * d;
        if (requires_grad(xhat)) {
          double *dst = grad_mut(xhat).data.data() + r * d;
          for (std::size_t j = 0; j < d; ++j) {
            dst[j] += grow[j] * srow[j];
          }
        }
        if (requires_grad(scale)) {
          double *dst = grad_mut(scale).data.data() + b * d;
          for (std::size_t j = 0; j < d; ++j) {
            dst[j] += grow[j] * xrow[j];
          }
        }
        if (requires_grad(shift)) {
          double *dst = grad_mut(shift).data.data() + b * d;
          for (std::size_t j = 0; j < d; ++j) {
            dst[j] += grow[j];
          }
        }
      }
    });
  }
  return id;
}

int Tape::self_attention(int x, int wq, int bq, int wk, int bk, int wv, int bv,
                         int wo, int bo, int batch, int seq_len, int heads) {
  const Tensor &tx = value(x);
  const int d = static_cast<int>(tx.cols());
  const int rows = static_cast<int>(tx.rows());
  if (rows != batch * seq_len || d % heads != 0) {
    throw Error("self_attention: shape mismatch");
  }
  const int dh = d / heads;
  const double alpha = 1.0 / std::sqrt(static_cast<double>(dh));

  // Projections over the whole batch.
  const int q_id = linear(x, wq, bq);
  const int k_id = linear(x, wk, bk);
  const int v_id = linear(x, wv, bv);
  const Tensor &q = value(q_id);
  const Tensor &k = value(k_id);
  const Tensor &v = value(v_id);

  // Attention weights per (sample, head), softmax over key positions.
  Tensor probs({static_cast<std::size_t>(batch) * heads,
                static_cast<std::size_t>(seq_len) * seq_len});
  Tensor mixed({static_cast<std::size_t>(rows), static_cast<std::size_t>(d)});
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      const std::size_t base = (static_cast<std::size_t>(b) * seq_len) * d +
                               static_cast<std::size_t>(h) * dh;
      double *prob = probs.data.data() +
                     (static_cast<std::size_t>(b) * heads + h) *
                         (static_cast<std::size_t>(seq_len) * seq_len);
      for (int i = 0; i < seq_len; ++i) {
        const double *qi = q.data.data() + base + static_cast<std::size_t>(i) * d;
        double *prow = prob + static_cast<std::size_t>(i) * seq_len;
        double mx = -1e300;
        for (int j = 0; j < seq_len; ++j) {
          const double *kj = k.data.data() + base + static_cast<std::size_t>(j) * d;
          double s = 0.0;
          for (int e = 0; e < dh; ++e) {
            s += qi[e] * kj[e];
          }
          prow[j] = s * alpha;
          mx = std::max(mx, prow[j]);
        }
        double sum = 0.0;
        for (int j = 0; j < seq_len; ++j) {
          prow[j] = std::exp(prow[j] - mx);
          sum += prow[j];
        }
        for (int j = 0; j < seq_len; ++j) {
          prow[j] /= sum;
        }
        double *orow = mixed.data.data() + base + static_cast<std::size_t>(i) * d;
        for (int e = 0; e < dh; ++e) {
          orow[e] = 0.0;
        }
        for (int j = 0; j < seq_len; ++j) {
          const double *vj = v.data.data() + base + static_cast<std::size_t>(j) * d;
          const double pij = prow[j];
          for (int e = 0; e < dh; ++e) {
            orow[e] += pij * vj[e];
          }
        }
      }
    }
  }

  const bool rg = requires_grad(q_id) || requires_grad(k_id) || requires_grad(v_id);
  if (rg && !(requires_grad(q_id) && requires_grad(k_id) && requires_grad(v_id))) {
    throw Error("self_attention: projections must track gradients together");
  }
  const int mixed_id = push(std::move(mixed), rg);
  if (rg) {
    const int probs_id = push(std::move(probs), false);
    backward_ops_.push_back([this, q_id, k_id, v_id, mixed_id, probs_id, batch,
                             seq_len, heads, d, dh, alpha] {
      const Tensor &g = grad(mixed_id);
      const Tensor &q2 = value(q_id);
      const Tensor &k2 = value(k_id);
      const Tensor &v2 = value(v_id);
      const Tensor &p2 = value(probs_id);
      Tensor &qg = grad_mut(q_id);
      Tensor &kg = grad_mut(k_id);
      Tensor &vg = grad_mut(v_id);
      std::vector<double> dp(static_cast<std::size_t>(seq_len));
      for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
          const std::size_t base = (static_cast<std::size_t>(b) * seq_len) * d +
                                   static_cast<std::size_t>(h) * dh;
          const double *prob = p2.data.data() +
                               (static_cast<std::size_t>(b) * heads + h) *
                                   (static_cast<std::size_t>(seq_len) * seq_len);
          for (int i = 0; i < seq_len; ++i) {
            const double *grow = g.data.data() + base + static_cast<std::size_t>(i) * d;
            const double *prow = prob + static_cast<std::size_t>(i) * seq_len;
            // dP and dV.
            double dot = 0.0;
            for (int j = 0; j < seq_len; ++j) {
              const double *vj = v2.data.data() + base + static_cast<std::size_t>(j) * d;
              double s = 0.0;
              for (int e = 0; e < dh; ++e) {
                s += grow[e] * vj[e];
              }
              dp[static_cast<std::size_t>(j)] = s;
              dot += s * prow[j];
              double *vgj = vg.data.data() + base + static_cast<std::size_t>(j) * d;
              const double pij = prow[j];
              for (int e = 0; e < dh; ++e) {
                vgj[e] += pij * grow[e];
              }
            }
            // Softmax backward, then dQ and dK.
            const double *qi = q2.data.data() + base + static_cast<std::size_t>(i) * d;
            double *qgi = qg.data.data() + base + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < seq_len; ++j) {
              const double ds = prow[j] * (dp[static_cast<std::size_t>(j)] - dot) * alpha;
              const double *kj = k2.data.data() + base + static_cast<std::size_t>(j) * d;
              double *kgj = kg.data.data() + base + static_cast<std::size_t>(j) * d;
              for (int e = 0; e < dh; ++e) {
                qgi[e] += ds * kj[e];
                kgj[e] += ds * qi[e];
              }
            }
          }
        }
      }
    });
  }
  return linear(mixed_id, wo, bo);
}

int Tape::select_condition(Tensor rows, int fallback,
                           std::vector<std::uint8_t> use_fallback) {
  const Tensor &fb = value(fallback);
  const std::size_t d = fb.numel();
  if (rows.cols() != d || rows.rows() != use_fallback.size()) {
    throw Error("select_condition: shape mismatch");
  }
  Tensor out(rows.dims);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const double *src = use_fallback[r] ? fb.data.data() : rows.data.data() + r * d;
    std::copy_n(src, d, out.data.data() + r * d);
  }
  const bool rg = requires_grad(fallback);
  const int id = push(std::move(out), rg);
  if (rg) {
    backward_ops_.push_back([this, fallback, id, d, mask = std::move(use_fallback)] {
      const Tensor &g = grad(id);
      Tensor &fg = grad_mut(fallback);
      for (std::size_t r = 0; r < mask.size(); ++r) {
        if (!mask[r]) {
          continue;
        }
        const double *src = g.data.data() + r * d;
        for (std::size_t j = 0; j < d; ++j) {
          fg.data[j] += src[j];
        }
      }
    });
  }
  return id;
}

int Tape::cross_entropy_sum(int logits, std::vector<int> targets) {
  const Tensor &tl = value(logits);
  const std::size_t n = tl.rows();
  const std::size_t k = tl.cols();
  if (targets.size() != n) {
    throw Error("cross_entropy_sum: target count mismatch");
  }
  Tensor softmax({n, k});
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double *row = tl.data.data() + r * k;
    double *srow = softmax.data.data() + r * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) {
      mx = std::max(mx, row[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      srow[j] = std::exp(row[j] - mx);
      sum += srow[j];
    }
    for (std::size_t j = 0; j < k; ++j) {
      srow[j] /= sum;
    }
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= k) {
      throw Error("cross_entropy_sum: target out of range");
    }
    loss += mx + std::log(sum) - row[static_cast<std::size_t>(t)];
  }
  Tensor out({1});
  out.data[0] = loss;
  const bool rg = requires_grad(logits);
  const int id = push(std::move(out), rg);
  if (rg) {
    const int soft_id = push(std::move(softmax), false);
    backward_ops_.push_back(
        [this, logits, id, soft_id, targets = std::move(targets), n, k] {
          const double gscale = grad(id).data[0];
          const Tensor &soft = value(soft_id);
          Tensor &lg = grad_mut(logits);
          for (std::size_t r = 0; r < n; ++r) {
            const double *srow = soft.data.data() + r * k;
            double *dst = lg.data.data() + r * k;
            for (std::size_t j = 0; j < k; ++j) {
              dst[j] += gscale * srow[j];
            }
            dst[static_cast<std::size_t>(targets[r])] -= gscale;
          }
        });
  }
  return id;
}

int Tape::scale(int x, double factor) {
  const Tensor &tx = value(x);
  Tensor out(tx.dims);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = tx.data[i] * factor;
  }
  const bool rg = requires_grad(x);
  const int id = push(std::move(out), rg);
  if (rg) {
    backward_ops_.push_back([this, x, id, factor] {
      const Tensor &g = grad(id);
      Tensor &xg = grad_mut(x);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        xg.data[i] += g.data[i] * factor;
      }
    });
  }
  return id;
}

void Tape::backward(int loss_id) {
  if (!recording_) {
    throw Error("backward on a non-recording tape");
  }
  Slot &loss = slots_[static_cast<std::size_t>(loss_id)];
  if (loss.value.numel() != 1 || !loss.requires_grad) {
    throw Error("backward expects a scalar loss that requires grad");
  }
  loss.grad.data[0] = 1.0;
  for (auto it = backward_ops_.rbegin(); it != backward_ops_.rend(); ++it) {
    (*it)();
  }
}

}  // namespace safeflow
