#include "wuneng/state.hpp"

#include <cmath>
#include <string>

#include "wuneng/error.hpp"
#include "wuneng/numerics.hpp"

namespace wuneng::state {

TokenStateInputs token_state_inputs(const TensorD& x_t, const TensorD& attn_fused_t,
                                    const StateParams& p) {
  using numerics::matmul;
  const std::size_t d_k = p.w_decay.cols();
  TokenStateInputs in;
  TensorD decay = matmul(x_t, p.w_decay).reshaped({d_k});
  TensorD icl = matmul(x_t, p.w_icl).reshaped({d_k});
  in.w = TensorD({d_k}, 0.0);
  in.a = TensorD({d_k}, 0.0);
  for (std::size_t j = 0; j < d_k; ++j) {
    in.w[j] = std::exp(-numerics::softplus(decay[j] + p.b_decay[j]));
    in.a[j] = numerics::sigmoid(icl[j] + p.b_icl[j]);
  }
  in.kappa_hat = matmul(x_t, p.w_kappa).reshaped({d_k});
  const double norm = numerics::frobenius_norm(in.kappa_hat);
  if (norm > 0.0) {
    for (auto& v : in.kappa_hat.data()) v /= norm;
  }
  in.k = matmul(x_t, p.w_repl).reshaped({d_k});
  in.v = matmul(attn_fused_t, p.w_sv).reshaped({d_k});
  return in;
}

void delta_rule_update(std::span<double> s, std::span<const double> w,
                       std::span<const double> kappa_hat, std::span<const double> k,
                       std::span<const double> v, std::span<const double> a) {
  const std::size_t d = w.size();
  for (std::size_t i = 0; i < d; ++i) {
    double* row = s.data() + i * d;
    // u = S_{t-1} kappa_hat^T, the component about to be erased.
    double u = 0.0;
    for (std::size_t m = 0; m < d; ++m) u += row[m] * kappa_hat[m];
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = row[j] * w[j] - u * (a[j] * kappa_hat[j]) + v[i] * k[j];
    }
  }
}

HeadState delta_rule_step(const HeadState& s_prev, const TokenStateInputs& in,
                          std::size_t token_index) {
  const std::size_t d = s_prev.d_k();
  for (const TensorD* t : {&in.w, &in.kappa_hat, &in.k, &in.v, &in.a}) {
    if (t->size() != d) {
      throw ShapeError("delta_rule_step: token input of length " +
                       std::to_string(t->size()) + " for state " +
                       shape_string(s_prev.s.dims()));
    }
  }
  HeadState next = s_prev;
  delta_rule_update(next.s.data(), in.w.data(), in.kappa_hat.data(), in.k.data(),
                    in.v.data(), in.a.data());
  if (!next.s.all_finite()) {
    throw NumericError("delta_rule_step: non-finite state at token " +
                       std::to_string(token_index));
  }
  return next;
}

std::vector<HeadState> run_recurrence(const TensorD& x, const TensorD& attn_fused,
                                      const StateParams& p, const HeadState* s0) {
  if (x.rows() != attn_fused.rows()) {
    throw ShapeError("run_recurrence: " + std::to_string(x.rows()) + " input rows vs " +
                     std::to_string(attn_fused.rows()) + " attention rows");
  }
  const std::size_t d_k = p.w_decay.cols();
  HeadState s = s0 ? *s0 : HeadState::zeros(d_k);
  std::vector<HeadState> out;
  out.reserve(x.rows());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const auto in = token_state_inputs(x.row_vector(t), attn_fused.row_vector(t), p);
    s = delta_rule_step(s, in, t);
    out.push_back(s);
  }
  return out;
}

TensorD query_state(const HeadState& s, std::span<const double> key) {
  const std::size_t d = s.d_k();
  if (key.size() != d) {
    throw ShapeError("query_state: key of length " + std::to_string(key.size()) +
                     " for state " + shape_string(s.s.dims()));
  }
  TensorD out({d}, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    auto row = s.s.row(i);
    for (std::size_t j = 0; j < d; ++j) out[j] += row[j] * key[i];
  }
  return out;
}

TensorD state_readout(const HeadState& s_t, const TensorD& x_t, const TensorD& w_hat_k,
                      double alpha) {
  const TensorD key = numerics::matmul(x_t, w_hat_k);
  return numerics::scale(query_state(s_t, key.data()), alpha);
}

ad::Var scan(ad::Var w, ad::Var kappa_hat, ad::Var k, ad::Var v, ad::Var a,
             std::size_t seq_len) {
  const TensorD& wv = w.value();
  const std::size_t rows = wv.rows(), d = wv.cols();
  for (ad::Var t : {kappa_hat, k, v, a}) {
    if (t.value().rows() != rows || t.value().cols() != d) {
      throw ShapeError("state::scan: operand " + shape_string(t.value().dims()) +
                       " vs decay " + shape_string(wv.dims()));
    }
  }
  if (seq_len == 0 || rows % seq_len != 0) {
    throw ShapeError("state::scan: " + std::to_string(rows) +
                     " rows is not a multiple of seq_len " + std::to_string(seq_len));
  }
  const std::size_t dd = d * d;
  TensorD out({rows, dd}, 0.0);
  std::vector<double> s(dd, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (r % seq_len == 0) std::fill(s.begin(), s.end(), 0.0);
    delta_rule_update(s, wv.row(r), kappa_hat.value().row(r), k.value().row(r),
                      v.value().row(r), a.value().row(r));
    for (double x : s) {
      if (!std::isfinite(x)) {
        throw NumericError("state::scan: non-finite state at token " +
                           std::to_string(r % seq_len));
      }
    }
    std::copy(s.begin(), s.end(), out.row(r).begin());
  }

  return w.graph->emit(
      std::move(out), {w, kappa_hat, k, v, a},
      [w, kappa_hat, k, v, a, seq_len, d](ad::Graph& g, std::size_t self) {
        const TensorD& gs = g.grad_ref(self);
        const TensorD& states = g.value(self);
        const std::size_t rows = gs.rows(), dd = d * d;
        TensorD gw(g.value(w).dims(), 0.0), gkh(gw.dims(), 0.0), gk(gw.dims(), 0.0),
            gv(gw.dims(), 0.0), ga(gw.dims(), 0.0);
        std::vector<double> carry(dd, 0.0), total(dd, 0.0), u(d), du(d), c(d);
        const std::vector<double> zero(dd, 0.0);
        for (std::size_t r = rows; r-- > 0;) {
          const std::size_t pos = r % seq_len;
          if (pos == seq_len - 1) std::fill(carry.begin(), carry.end(), 0.0);
          auto grow = gs.row(r);
          for (std::size_t i = 0; i < dd; ++i) total[i] = grow[i] + carry[i];
          const double* prev = pos == 0 ? zero.data() : states.row(r - 1).data();
          auto wr = g.value(w).row(r);
          auto kh = g.value(kappa_hat).row(r);
          auto kr = g.value(k).row(r);
          auto vr = g.value(v).row(r);
          auto ar = g.value(a).row(r);
          auto dw = gw.row(r);
          auto dkh = gkh.row(r);
          auto dk = gk.row(r);
          auto dv = gv.row(r);
          auto da = ga.row(r);
          for (std::size_t j = 0; j < d; ++j) c[j] = ar[j] * kh[j];
          for (std::size_t i = 0; i < d; ++i) {
            const double* prow = prev + i * d;
            double ui = 0.0;
            for (std::size_t m = 0; m < d; ++m) ui += prow[m] * kh[m];
            u[i] = ui;
          }
          // S_t[i][j] = P[i][j] w_j - u_i c_j + v_i k_j with u = P kh^T.
          for (std::size_t i = 0; i < d; ++i) {
            const double* G = total.data() + i * d;
            const double* prow = prev + i * d;
            double dvi = 0.0, dui = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              dvi += G[j] * kr[j];
              dui -= G[j] * c[j];
              dk[j] += vr[i] * G[j];
              dw[j] += G[j] * prow[j];
            }
            dv[i] += dvi;
            du[i] = dui;
          }
          for (std::size_t j = 0; j < d; ++j) {
            double dc = 0.0;
            for (std::size_t i = 0; i < d; ++i) dc -= total[i * d + j] * u[i];
            da[j] += dc * kh[j];
            dkh[j] += dc * ar[j];
          }
          for (std::size_t m = 0; m < d; ++m) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) acc += du[i] * prev[i * d + m];
            dkh[m] += acc;
          }
          // dP = G diag(w) + du kh: gradient flowing into S_{t-1}.
          for (std::size_t i = 0; i < d; ++i) {
            const double* G = total.data() + i * d;
            double* dst = carry.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] = G[j] * wr[j] + du[i] * kh[j];
          }
        }
        g.accumulate(w, std::move(gw));
        g.accumulate(kappa_hat, std::move(gkh));
        g.accumulate(k, std::move(gk));
        g.accumulate(v, std::move(gv));
        g.accumulate(a, std::move(ga));
      });
}

ad::Var query_states(ad::Var states, ad::Var keys) {
  const TensorD& sv = states.value();
  const TensorD& kv = keys.value();
  const std::size_t rows = kv.rows(), d = kv.cols();
  if (sv.rows() != rows || sv.cols() != d * d) {
    throw ShapeError("state::query_states: states " + shape_string(sv.dims()) +
                     " vs keys " + shape_string(kv.dims()));
  }
  TensorD out({rows, d}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* s = sv.row(r).data();
    auto key = kv.row(r);
    auto o = out.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      const double ki = key[i];
      for (std::size_t j = 0; j < d; ++j) o[j] += s[i * d + j] * ki;
    }
  }
  return states.graph->emit(std::move(out), {states, keys},
                            [states, keys, d](ad::Graph& g, std::size_t self) {
    const TensorD& gy = g.grad_ref(self);
    const std::size_t rows = gy.rows();
    if (g.needs_grad(states)) {
      TensorD& gs = g.grad_buffer(states);
      for (std::size_t r = 0; r < rows; ++r) {
        auto key = g.value(keys).row(r);
        auto dy = gy.row(r);
        double* dst = gs.row(r).data();
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j) dst[i * d + j] += key[i] * dy[j];
      }
    }
    if (g.needs_grad(keys)) {
      TensorD& gk = g.grad_buffer(keys);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* s = g.value(states).row(r).data();
        auto dy = gy.row(r);
        auto dst = gk.row(r);
        for (std::size_t i = 0; i < d; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < d; ++j) acc += s[i * d + j] * dy[j];
          dst[i] += acc;
        }
      }
    }
  });
}

}  // namespace wuneng::state
