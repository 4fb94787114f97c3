#include "wuneng/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wuneng/error.hpp"
#include "wuneng/numerics.hpp"

namespace wuneng::attention {

using numerics::matmul;

QKV project_qkv(const TensorD& x, const AttnHeadParams& p) {
  if (x.cols() != p.w_q.rows()) {
    throw ShapeError("project_qkv: input " + shape_string(x.dims()) +
                     " does not match projection " + shape_string(p.w_q.dims()));
  }
  return QKV{matmul(x, p.w_q), matmul(x, p.w_k), matmul(x, p.w_v)};
}

TensorD augment_queries(const TensorD& x, std::span<const HeadState> s_seq,
                        const AttnHeadParams& p) {
  if (s_seq.size() != x.rows()) {
    throw ShapeError("augment_queries: " + std::to_string(s_seq.size()) +
                     " states for " + std::to_string(x.rows()) + " tokens");
  }
  TensorD q = matmul(x, p.w_q);
  const TensorD k = matmul(x, p.w_k);
  const double lambda = p.lambda[0];
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const TensorD read = state::query_state(s_seq[t], k.row(t));
    const TensorD term = matmul(read, p.w_q_state);
    auto qr = q.row(t);
    for (std::size_t j = 0; j < qr.size(); ++j) qr[j] += lambda * term[j];
  }
  return q;
}

TensorD scaled_logits(const TensorD& q, const TensorD& k) {
  if (q.cols() != k.cols()) {
    throw ShapeError("scaled_logits: " + shape_string(q.dims()) + " vs " +
                     shape_string(k.dims()));
  }
  TensorD logits = numerics::matmul_nt(q, k);
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  for (auto& v : logits.data()) v *= inv;
  return logits;
}

TensorD causal_head(const TensorD& q, const TensorD& k, const TensorD& v) {
  if (q.rows() != k.rows() || k.rows() != v.rows() || q.cols() != k.cols()) {
    throw ShapeError("causal_head: q " + shape_string(q.dims()) + ", k " +
                     shape_string(k.dims()) + ", v " + shape_string(v.dims()));
  }
  const TensorD weights = numerics::softmax_masked_rows(scaled_logits(q, k), true);
  return matmul(weights, v);
}

ad::Var causal_attention(ad::Var q, ad::Var k, ad::Var v, std::size_t seq_len) {
  const TensorD& qv = q.value();
  const TensorD& kv = k.value();
  const TensorD& vv = v.value();
  const std::size_t rows = qv.rows(), d = qv.cols(), dv = vv.cols();
  if (kv.rows() != rows || vv.rows() != rows || kv.cols() != d) {
    throw ShapeError("causal_attention: q " + shape_string(qv.dims()) + ", k " +
                     shape_string(kv.dims()) + ", v " + shape_string(vv.dims()));
  }
  if (seq_len == 0 || rows % seq_len != 0) {
    throw ShapeError("causal_attention: " + std::to_string(rows) +
                     " rows is not a multiple of seq_len " + std::to_string(seq_len));
  }
  const std::size_t n = seq_len, blocks = rows / n;
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  // Attention weights of every block, kept for the backward pass.
  TensorD probs({blocks * n, n}, 0.0);
  TensorD out({rows, dv}, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t base = b * n;
    for (std::size_t i = 0; i < n; ++i) {
      auto qi = qv.row(base + i);
      auto p = probs.row(base + i);
      double mx = -INFINITY;
      for (std::size_t j = 0; j <= i; ++j) {
        p[j] = numerics::dot(qi, kv.row(base + j)) * inv;
        mx = std::max(mx, p[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        p[j] = std::exp(p[j] - mx);
        total += p[j];
      }
      auto o = out.row(base + i);
      for (std::size_t j = 0; j <= i; ++j) {
        p[j] /= total;
        auto vj = vv.row(base + j);
        for (std::size_t c = 0; c < dv; ++c) o[c] += p[j] * vj[c];
      }
    }
  }
  return q.graph->emit(
      std::move(out), {q, k, v},
      [q, k, v, n, inv, probs = std::move(probs)](ad::Graph& g, std::size_t self) {
        const TensorD& gy = g.grad_ref(self);
        const TensorD& qv = g.value(q);
        const TensorD& kv = g.value(k);
        const TensorD& vv = g.value(v);
        const std::size_t rows = gy.rows(), d = qv.cols(), dv = vv.cols();
        TensorD gq(qv.dims(), 0.0), gk(kv.dims(), 0.0), gv(vv.dims(), 0.0);
        std::vector<double> dl(n);
        for (std::size_t base = 0; base < rows; base += n) {
          for (std::size_t i = 0; i < n; ++i) {
            auto p = probs.row(base + i);
            auto dy = gy.row(base + i);
            double weighted = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
              auto vj = vv.row(base + j);
              auto dvj = gv.row(base + j);
              double dp = 0.0;
              for (std::size_t c = 0; c < dv; ++c) {
                dp += dy[c] * vj[c];
                dvj[c] += p[j] * dy[c];
              }
              dl[j] = dp;
              weighted += dp * p[j];
            }
            auto qi = qv.row(base + i);
            auto dqi = gq.row(base + i);
            for (std::size_t j = 0; j <= i; ++j) {
              const double ds = p[j] * (dl[j] - weighted) * inv;
              auto kj = kv.row(base + j);
              auto dkj = gk.row(base + j);
              for (std::size_t c = 0; c < d; ++c) {
                dqi[c] += ds * kj[c];
                dkj[c] += ds * qi[c];
              }
            }
          }
        }
        g.accumulate(q, std::move(gq));
        g.accumulate(k, std::move(gk));
        g.accumulate(v, std::move(gv));
      });
}

}  // namespace wuneng::attention
