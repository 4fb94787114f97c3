#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wuneng/attention.hpp"
#include "wuneng/autodiff.hpp"
#include "wuneng/fusion.hpp"
#include "wuneng/rng.hpp"
#include "wuneng/state.hpp"
#include "wuneng/tensor.hpp"

namespace wuneng {

inline constexpr double kLayerNormEps = 1e-5;

/// Every learnable value of one hybrid layer. Instantiated with TensorD for
/// storage and with ad::Var for a bound computation graph.
template <class T>
struct LayerParamsT {
  std::vector<AttnHeadT<T>> attn;
  std::vector<StateParamsT<T>> state;
  std::vector<MiddleHeadT<T>> middle;  // empty when middle heads are off
  T w_attn;                            // combined width x d_model
  T ffn_in;                            // d_model x d_ffn
  T ffn_out;                           // d_ffn x d_model
  T ln1_scale, ln1_shift;
  T ln2_scale, ln2_shift;
  FusionConfig fusion;
};
using LayerParams = LayerParamsT<TensorD>;
using LayerVars = LayerParamsT<ad::Var>;

struct LayerDims {
  std::size_t d_model = 0;
  std::size_t n_heads = 0;
  std::size_t d_ffn = 0;

  std::size_t d_k() const noexcept { return d_model / n_heads; }
};

/// Calls f(name, tensor) for every stored parameter in canonical order.
/// Names are relative to `prefix`, e.g. prefix + "attn.head.1.w_q".
template <class P, class F>
void visit_layer(P& p, const std::string& prefix, F&& f) {
  f(prefix + "ln1.scale", p.ln1_scale);
  f(prefix + "ln1.shift", p.ln1_shift);
  for (std::size_t h = 0; h < p.attn.size(); ++h) {
    const std::string hp = prefix + "attn.head." + std::to_string(h) + ".";
    auto& a = p.attn[h];
    f(hp + "w_q", a.w_q);
    f(hp + "w_k", a.w_k);
    f(hp + "w_v", a.w_v);
    f(hp + "w_q_state", a.w_q_state);
    f(hp + "lambda", a.lambda);
  }
  for (std::size_t h = 0; h < p.state.size(); ++h) {
    const std::string hp = prefix + "state.head." + std::to_string(h) + ".";
    auto& s = p.state[h];
    f(hp + "w_decay", s.w_decay);
    f(hp + "b_decay", s.b_decay);
    f(hp + "w_icl", s.w_icl);
    f(hp + "b_icl", s.b_icl);
    f(hp + "w_kappa", s.w_kappa);
    f(hp + "w_repl", s.w_repl);
    f(hp + "w_sv", s.w_sv);
    f(hp + "w_hat_k", s.w_hat_k);
    f(hp + "alpha", s.alpha);
  }
  for (std::size_t h = 0; h < p.middle.size(); ++h) {
    const std::string hp = prefix + "middle.head." + std::to_string(h) + ".";
    auto& m = p.middle[h];
    f(hp + "w_mid", m.w_mid);
    if (p.fusion.middle == MiddleMode::kAdditive) f(hp + "w_state_add", m.w_state_add);
    if (p.fusion.middle == MiddleMode::kGated) f(hp + "w_gate", m.w_gate);
    f(hp + "beta", m.beta);
    f(hp + "gamma_mid", m.gamma_mid);
  }
  f(prefix + "proj.w_attn", p.w_attn);
  f(prefix + "ln2.scale", p.ln2_scale);
  f(prefix + "ln2.shift", p.ln2_shift);
  f(prefix + "ffn.w_in", p.ffn_in);
  f(prefix + "ffn.w_out", p.ffn_out);
}

/// LayerVars with the same structure as `p`, each leaf produced by
/// make(const TensorD&) -> ad::Var.
template <class Make>
LayerVars bind_layer(const LayerParams& p, Make&& make) {
  LayerVars v;
  v.fusion = p.fusion;
  v.attn.resize(p.attn.size());
  v.state.resize(p.state.size());
  v.middle.resize(p.middle.size());
  std::vector<ad::Var*> slots;
  visit_layer(v, "", [&](const std::string&, ad::Var& s) { slots.push_back(&s); });
  std::size_t i = 0;
  visit_layer(p, "", [&](const std::string&, const TensorD& t) { *slots[i++] = make(t); });
  return v;
}

/// Glorot weights, unit layer-norm scales, and every augmentation scalar
/// (alpha, beta, gamma_mid, lambda) at zero.
LayerParams init_layer(const LayerDims& dims, const FusionConfig& fusion, Rng& rng);

LayerDims layer_dims(const LayerParams& p);

struct LayerOutput {
  TensorD h;
  std::vector<HeadState> final_states;  // one per head, after the last token
};

/// h = h_prev + a + ffn(h_prev + a) for one sequence (tokens as rows).
LayerOutput layer_forward(const TensorD& h_prev, const LayerParams& p);

/// W_out relu^2(W_in ln(h_pre)), per token.
TensorD ffn(const TensorD& h_pre, const LayerParams& p);

struct LayerOptions {
  /// Skip the state and middle-head paths: a pre-LN attention + FFN block
  /// using the first d_model rows of W_attn.
  bool plain = false;
};

namespace layer {

/// Graph form over stacked sequences of `seq_len` rows. When `states_out`
/// is given it receives the per-head state sequences (rows x d_k^2).
ad::Var forward(ad::Var h, const LayerVars& p, std::size_t seq_len,
                const LayerOptions& opts = {}, std::vector<ad::Var>* states_out = nullptr);
ad::Var ffn(ad::Var h_pre, const LayerVars& p);

}  // namespace layer
}  // namespace wuneng
