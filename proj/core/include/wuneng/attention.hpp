#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wuneng/autodiff.hpp"
#include "wuneng/state.hpp"
#include "wuneng/tensor.hpp"

namespace wuneng {

/// One standard attention head plus its state-query augmentation.
template <class T>
struct AttnHeadT {
  T w_q;        // d_model x d_k
  T w_k;        // d_model x d_k
  T w_v;        // d_model x d_k
  T w_q_state;  // d_k x d_k, maps the state readout into query space
  T lambda;     // scalar gain on the state-derived query term
};
using AttnHeadParams = AttnHeadT<TensorD>;

/// Per-head attention outputs A_h, each n x d_k.
struct AttnOutput {
  std::vector<TensorD> per_head;
};

struct QKV {
  TensorD q, k, v;
};

namespace attention {

/// Q = x W_q, K = x W_k, V = x W_v with tokens as rows.
QKV project_qkv(const TensorD& x, const AttnHeadParams& p);

/// Q[t] = x[t] W_q + lambda * (S_t^T K[t]) W_q_state, one state per token.
TensorD augment_queries(const TensorD& x, std::span<const HeadState> s_seq,
                        const AttnHeadParams& p);

/// Q K^T / sqrt(d_k), before masking.
TensorD scaled_logits(const TensorD& q, const TensorD& k);

/// softmax(causal_mask(Q K^T / sqrt(d_k))) V for one sequence.
TensorD causal_head(const TensorD& q, const TensorD& k, const TensorD& v);

/// `causal_head` applied independently to each contiguous block of
/// `seq_len` rows.
ad::Var causal_attention(ad::Var q, ad::Var k, ad::Var v, std::size_t seq_len);

}  // namespace attention
}  // namespace wuneng
