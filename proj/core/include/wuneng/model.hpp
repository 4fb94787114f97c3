#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wuneng/autodiff.hpp"
#include "wuneng/fusion.hpp"
#include "wuneng/layer.hpp"
#include "wuneng/tensor.hpp"

namespace wuneng {

struct ModelConfig {
  std::size_t vocab_size = 16;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ffn = 256;
  FusionConfig fusion;
  std::uint64_t seed = 1;

  std::size_t d_k() const noexcept { return d_model / n_heads; }
  LayerDims layer_dims() const noexcept { return {d_model, n_heads, d_ffn}; }
  /// Throws ConfigError when a size is zero or d_model % n_heads != 0.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Ordered key/value view of a config, as stored in checkpoint headers.
std::vector<std::pair<std::string, std::string>> to_key_values(const ModelConfig& cfg);
/// Inverse of `to_key_values`; unknown keys throw ConfigError.
ModelConfig model_config_from(const std::map<std::string, std::string>& kv);

template <class T>
struct ModelParamsT {
  ModelConfig config;
  T embed;    // vocab x d_model
  T unembed;  // d_model x vocab
  std::vector<LayerParamsT<T>> layers;
};
using ModelParams = ModelParamsT<TensorD>;
using ModelVars = ModelParamsT<ad::Var>;

/// Canonical parameter order: embed, layers in order, unembed.
template <class P, class F>
void visit_model(P& p, F&& f) {
  f(std::string("embed.weight"), p.embed);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    visit_layer(p.layers[l], "layer." + std::to_string(l) + ".", f);
  }
  f(std::string("unembed.weight"), p.unembed);
}

/// Deterministic in `cfg.seed`. The unembedding starts at zero, so a fresh
/// model predicts the uniform distribution.
ModelParams init_model(const ModelConfig& cfg);

/// Name and address of one stored tensor.
struct ParamRef {
  std::string name;
  TensorD* value = nullptr;
};

std::vector<ParamRef> param_refs(ModelParams& p);
std::size_t stored_float_count(const ModelParams& p);

/// ModelVars whose leaves are `leaves` in canonical order.
ModelVars bind_model(const ModelParams& p, std::span<const ad::Var> leaves);
/// Convenience: every tensor becomes a graph parameter.
ModelVars bind_parameters(ad::Graph& g, const ModelParams& p);

struct ForwardOptions {
  LayerOptions layer;
};

/// Logits for stacked sequences of `seq_len` tokens each.
ad::Var model_forward(const ModelVars& v, std::span<const int> tokens, std::size_t seq_len,
                      const ForwardOptions& opts = {});

/// Logits (n x vocab) for a single sequence.
TensorD model_forward(std::span<const int> tokens, const ModelParams& p,
                      const ForwardOptions& opts = {});

/// Reference pure pre-LN attention transformer built from the base
/// parameters of `p` (embeddings, Q/K/V, first d_model rows of W_attn,
/// layer norms, FFN). Evaluated with plain module kernels, no graph.
TensorD plain_forward(std::span<const int> tokens, const ModelParams& p);

/// Stored floats split by role. `base_*` fields make up a plain attention
/// transformer; the rest are what the hybrid layer adds.
struct ParamBreakdown {
  std::size_t base_embeddings = 0;  // embed + unembed
  std::size_t base_attention = 0;   // W_q, W_k, W_v and the d_model x d_model block of W_attn
  std::size_t base_ffn = 0;
  std::size_t base_layer_norm = 0;
  std::size_t add_query_state = 0;     // W_q_state
  std::size_t add_state_keys = 0;      // W_hat_k
  std::size_t add_state_inputs = 0;    // decay, icl (with biases), kappa, replacement key
  std::size_t add_state_values = 0;    // W_sv
  std::size_t add_middle = 0;          // W_mid, W_state_add
  std::size_t add_gates = 0;           // W_gate
  std::size_t add_projection = 0;      // extra rows of W_attn
  std::size_t add_scalars = 0;         // alpha, beta, gamma_mid, lambda

  std::size_t base() const noexcept;
  std::size_t additions() const noexcept;
  std::size_t total() const noexcept { return base() + additions(); }
  /// additions / base; 0 when base is 0.
  double ratio() const noexcept;
};

ParamBreakdown count_params(const ModelConfig& cfg);

}  // namespace wuneng
