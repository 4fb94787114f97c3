#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wuneng/autodiff.hpp"
#include "wuneng/tensor.hpp"

namespace wuneng {

/// Square d_k x d_k recurrent memory of one head. Rows index the value
/// space, columns the key space: a write adds outer(v, k).
struct HeadState {
  TensorD s;

  static HeadState zeros(std::size_t d_k) { return HeadState{TensorD::zeros(d_k, d_k)}; }
  std::size_t d_k() const noexcept { return s.rows(); }
};

/// Per-head projections that drive the delta-rule state and its readout.
template <class T>
struct StateParamsT {
  T w_decay;  // d_model x d_k
  T b_decay;  // d_k
  T w_icl;    // d_model x d_k
  T b_icl;    // d_k
  T w_kappa;  // d_model x d_k
  T w_repl;   // d_model x d_k
  T w_sv;     // width of the fused attention output x d_k
  T w_hat_k;  // d_model x d_k, query key for the state readout
  T alpha;    // scalar gain on the readout
};
using StateParams = StateParamsT<TensorD>;

/// Per-token quantities consumed by one delta-rule step.
struct TokenStateInputs {
  TensorD w;          // decay, in (0, 1]
  TensorD kappa_hat;  // unit-norm removal key, or exactly zero
  TensorD k;          // replacement key
  TensorD v;          // value
  TensorD a;          // in-context learning rate, in (0, 1)
};

namespace state {

/// w = exp(-softplus(x W_decay + b)), a = sigmoid(x W_icl + b),
/// kappa_hat = normalize(x W_kappa), k = x W_repl, v = attn_fused W_sv.
TokenStateInputs token_state_inputs(const TensorD& x_t, const TensorD& attn_fused_t,
                                    const StateParams& p);

/// S_t = S_{t-1} (diag(w) - kappa_hat^T (a * kappa_hat)) + v^T k.
///
/// Throws NumericError naming `token_index` if the result is not finite.
HeadState delta_rule_step(const HeadState& s_prev, const TokenStateInputs& in,
                          std::size_t token_index = 0);

/// In-place form of `delta_rule_step` on a row-major d_k x d_k buffer.
/// Uses the rank-1 structure of the transition, O(d_k^2) per token.
void delta_rule_update(std::span<double> s, std::span<const double> w,
                       std::span<const double> kappa_hat, std::span<const double> k,
                       std::span<const double> v, std::span<const double> a);

/// States after consuming tokens 0..t for every t; `s0` defaults to zero.
std::vector<HeadState> run_recurrence(const TensorD& x, const TensorD& attn_fused,
                                      const StateParams& p,
                                      const HeadState* s0 = nullptr);

/// S^T key: out[j] = sum_i S[i][j] key[i].
TensorD query_state(const HeadState& s, std::span<const double> key);

/// alpha * S_t^T (x_t W_hat_k)^T as a d_k vector.
TensorD state_readout(const HeadState& s_t, const TensorD& x_t, const TensorD& w_hat_k,
                      double alpha);

// Graph forms over stacked sequences: `rows` = batch * seq_len tokens, each
// sequence contiguous. The state sequence is a rows x d_k^2 matrix whose
// row t is S_t flattened row-major.

/// Runs the recurrence from a zero state independently per sequence.
ad::Var scan(ad::Var w, ad::Var kappa_hat, ad::Var k, ad::Var v, ad::Var a,
             std::size_t seq_len);
/// Row-wise `query_state`: out[t] = S_t^T keys[t].
ad::Var query_states(ad::Var states, ad::Var keys);

}  // namespace state
}  // namespace wuneng
