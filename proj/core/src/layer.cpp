#include "wuneng/layer.hpp"

#include <cmath>

#include "wuneng/error.hpp"
#include "wuneng/numerics.hpp"

namespace wuneng {

using numerics::init_glorot;

LayerParams init_layer(const LayerDims& dims, const FusionConfig& fusion, Rng& rng) {
  if (dims.n_heads == 0 || dims.d_model % dims.n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(dims.d_model) +
                      " is not divisible by n_heads " + std::to_string(dims.n_heads));
  }
  const std::size_t dm = dims.d_model, dk = dims.d_k(), dff = dims.d_ffn;
  LayerParams p;
  p.fusion = fusion;
  p.ln1_scale = TensorD({dm}, 1.0);
  p.ln1_shift = TensorD({dm}, 0.0);
  p.ln2_scale = TensorD({dm}, 1.0);
  p.ln2_shift = TensorD({dm}, 0.0);
  for (std::size_t h = 0; h < dims.n_heads; ++h) {
    AttnHeadParams a;
    a.w_q = init_glorot(dm, dk, rng);
    a.w_k = init_glorot(dm, dk, rng);
    a.w_v = init_glorot(dm, dk, rng);
    a.w_q_state = init_glorot(dk, dk, rng);
    a.lambda = TensorD::scalar(0.0);
    p.attn.push_back(std::move(a));
  }
  const std::size_t sv_width = fusion::state_value_width(fusion, dm);
  for (std::size_t h = 0; h < dims.n_heads; ++h) {
    StateParams s;
    s.w_decay = init_glorot(dm, dk, rng);
    // Spread per-channel decays over w in [0.5, 0.99] at zero input.
    s.b_decay = TensorD({dk}, 0.0);
    for (std::size_t j = 0; j < dk; ++j) {
      const double frac = dk > 1 ? static_cast<double>(j) / static_cast<double>(dk - 1) : 0.0;
      const double w = 0.5 + 0.49 * frac;
      s.b_decay[j] = std::log(std::expm1(-std::log(w)));
    }
    s.w_icl = init_glorot(dm, dk, rng);
    s.b_icl = TensorD({dk}, 0.0);
    s.w_kappa = init_glorot(dm, dk, rng);
    s.w_repl = init_glorot(dm, dk, rng);
    s.w_sv = init_glorot(sv_width, dk, rng);
    s.w_hat_k = init_glorot(dm, dk, rng);
    s.alpha = TensorD::scalar(0.0);
    p.state.push_back(std::move(s));
  }
  if (fusion.middle != MiddleMode::kOff) {
    for (std::size_t h = 0; h < dims.n_heads; ++h) {
      MiddleHeadParams m;
      m.w_mid = init_glorot(dk, dk, rng);
      if (fusion.middle == MiddleMode::kAdditive) m.w_state_add = init_glorot(dk, dk, rng);
      if (fusion.middle == MiddleMode::kGated) m.w_gate = init_glorot(2 * dk, dk, rng);
      m.beta = TensorD::scalar(0.0);
      m.gamma_mid = TensorD::scalar(0.0);
      p.middle.push_back(std::move(m));
    }
  }
  p.w_attn = init_glorot(fusion::combined_width(fusion, dm), dm, rng);
  p.ffn_in = init_glorot(dm, dff, rng);
  p.ffn_out = init_glorot(dff, dm, rng);
  return p;
}

LayerDims layer_dims(const LayerParams& p) {
  return LayerDims{p.ln1_scale.size(), p.attn.size(), p.ffn_in.cols()};
}

LayerOutput layer_forward(const TensorD& h_prev, const LayerParams& p) {
  if (h_prev.rows() == 0) throw ShapeError("layer_forward: empty sequence");
  ad::Graph g(false);
  const LayerVars v = bind_layer(p, [&](const TensorD& t) { return g.constant(t); });
  std::vector<ad::Var> states;
  const ad::Var h = g.constant(h_prev.rank() == 1 ? h_prev.reshaped({1, h_prev.size()}) : h_prev);
  const ad::Var out = layer::forward(h, v, h.value().rows(), {}, &states);
  LayerOutput result{out.value(), {}};
  const std::size_t dk = layer_dims(p).d_k();
  for (const auto& s : states) {
    const auto last = s.value().row(s.value().rows() - 1);
    result.final_states.push_back(
        HeadState{TensorD({dk, dk}, std::vector<double>(last.begin(), last.end()))});
  }
  return result;
}

TensorD ffn(const TensorD& h_pre, const LayerParams& p) {
  const TensorD x = numerics::layer_norm_rows(h_pre, p.ln2_scale, p.ln2_shift, kLayerNormEps);
  return numerics::matmul(
      numerics::activation(ActivationKind::kReluSquared, numerics::matmul(x, p.ffn_in)),
      p.ffn_out);
}

namespace layer {

ad::Var ffn(ad::Var h_pre, const LayerVars& p) {
  const ad::Var x = ad::layer_norm_rows(h_pre, p.ln2_scale, p.ln2_shift, kLayerNormEps);
  return ad::matmul(ad::relu_squared(ad::matmul(x, p.ffn_in)), p.ffn_out);
}

ad::Var forward(ad::Var h, const LayerVars& p, std::size_t seq_len, const LayerOptions& opts,
                std::vector<ad::Var>* states_out) {
  ad::Graph& g = *h.graph;
  const std::size_t n_heads = p.attn.size();
  const std::size_t rows = h.value().rows();
  const std::size_t d_model = h.value().cols();
  if (p.ln1_scale.value().size() != d_model) {
    throw ShapeError("layer::forward: hidden width " + std::to_string(d_model) +
                     " vs layer width " + std::to_string(p.ln1_scale.value().size()));
  }
  const std::size_t d_k = d_model / n_heads;
  const FusionConfig& cfg = p.fusion;
  const bool cross = cfg.middle != MiddleMode::kOff;

  const ad::Var x = ad::layer_norm_rows(h, p.ln1_scale, p.ln1_shift, kLayerNormEps);

  // Pass 1: attention with unaugmented queries.
  std::vector<ad::Var> q0(n_heads), k(n_heads), v(n_heads), a0(n_heads);
  for (std::size_t hd = 0; hd < n_heads; ++hd) {
    q0[hd] = ad::matmul(x, p.attn[hd].w_q);
    k[hd] = ad::matmul(x, p.attn[hd].w_k);
    v[hd] = ad::matmul(x, p.attn[hd].w_v);
    a0[hd] = attention::causal_attention(q0[hd], k[hd], v[hd], seq_len);
  }

  ad::Var a_out;
  if (opts.plain) {
    const ad::Var heads = ad::concat_cols(a0);
    a_out = ad::matmul(heads, ad::slice_rows(p.w_attn, 0, d_model));
  } else {
    // Value source for the state: F({A_h}), or F({A_h},{M_h}) with pass-1
    // middle heads. No state exists yet in pass 1, so their readout is zero.
    std::vector<std::vector<ad::Var>> value_groups{a0};
    if (cross) {
      const ad::Var no_read = g.constant(TensorD::zeros(rows, d_k));
      std::vector<ad::Var> m0(n_heads);
      for (std::size_t hd = 0; hd < n_heads; ++hd) {
        m0[hd] = fusion::middle_heads(a0[hd], no_read, p.middle[hd], cfg.middle);
      }
      value_groups.push_back(std::move(m0));
    }
    const ad::Var attn_fused = fusion::combine(value_groups, cfg.combine);

    std::vector<ad::Var> group_attn(n_heads), group_state(n_heads), group_mid(n_heads);
    for (std::size_t hd = 0; hd < n_heads; ++hd) {
      const auto& sp = p.state[hd];
      const ad::Var w = ad::exp(ad::neg(ad::softplus(ad::add_bias(ad::matmul(x, sp.w_decay), sp.b_decay))));
      const ad::Var a = ad::sigmoid(ad::add_bias(ad::matmul(x, sp.w_icl), sp.b_icl));
      const ad::Var kappa_hat = ad::l2_normalize_rows(ad::matmul(x, sp.w_kappa));
      const ad::Var k_repl = ad::matmul(x, sp.w_repl);
      const ad::Var v_state = ad::matmul(attn_fused, sp.w_sv);
      const ad::Var states = state::scan(w, kappa_hat, k_repl, v_state, a, seq_len);
      if (states_out) states_out->push_back(states);

      // Pass 2: queries augmented with the causal state sequence.
      const auto& ap = p.attn[hd];
      const ad::Var q_read = state::query_states(states, k[hd]);
      const ad::Var q = ad::add(q0[hd], ad::scale(ad::matmul(q_read, ap.w_q_state), ap.lambda));
      const ad::Var a_h = attention::causal_attention(q, k[hd], v[hd], seq_len);

      const ad::Var read = ad::scale(state::query_states(states, ad::matmul(x, sp.w_hat_k)), sp.alpha);
      group_state[hd] = read;
      if (cross) {
        const auto& mp = p.middle[hd];
        group_mid[hd] = fusion::middle_heads(a_h, read, mp, cfg.middle);
        group_attn[hd] = ad::add(a_h, ad::scale(group_mid[hd], mp.gamma_mid));
      } else {
        group_attn[hd] = a_h;
      }
    }
    std::vector<std::vector<ad::Var>> groups{group_attn, group_state};
    if (cfg.middle == MiddleMode::kConcat) groups.push_back(group_mid);
    a_out = ad::matmul(fusion::combine(groups, cfg.combine), p.w_attn);
  }

  const ad::Var h1 = ad::add(h, a_out);
  return ad::add(h1, ffn(h1, p));
}

}  // namespace layer
}  // namespace wuneng
