#include "wuneng/model.hpp"

#include <charconv>

#include "wuneng/error.hpp"
#include "wuneng/numerics.hpp"

namespace wuneng {

void ModelConfig::validate() const {
  if (vocab_size == 0 || d_model == 0 || n_heads == 0 || d_ffn == 0) {
    throw ConfigError("vocab_size, d_model, n_heads and d_ffn must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (d_model / n_heads < 1 || d_model < 2) throw ConfigError("d_model must be at least 2");
}

std::vector<std::pair<std::string, std::string>> to_key_values(const ModelConfig& cfg) {
  return {
      {"vocab_size", std::to_string(cfg.vocab_size)},
      {"d_model", std::to_string(cfg.d_model)},
      {"n_heads", std::to_string(cfg.n_heads)},
      {"n_layers", std::to_string(cfg.n_layers)},
      {"d_ffn", std::to_string(cfg.d_ffn)},
      {"combine_mode", std::string(to_string(cfg.fusion.combine))},
      {"middle_mode", std::string(to_string(cfg.fusion.middle))},
      {"seed", std::to_string(cfg.seed)},
  };
}

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

}  // namespace

ModelConfig model_config_from(const std::map<std::string, std::string>& kv) {
  ModelConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "vocab_size") cfg.vocab_size = parse_u64(key, value);
    else if (key == "d_model") cfg.d_model = parse_u64(key, value);
    else if (key == "n_heads") cfg.n_heads = parse_u64(key, value);
    else if (key == "n_layers") cfg.n_layers = parse_u64(key, value);
    else if (key == "d_ffn") cfg.d_ffn = parse_u64(key, value);
    else if (key == "combine_mode") cfg.fusion.combine = parse_combine_mode(value);
    else if (key == "middle_mode") cfg.fusion.middle = parse_middle_mode(value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else throw ConfigError("unknown model config key '" + key + "'");
  }
  return cfg;
}

ModelParams init_model(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  ModelParams p;
  p.config = cfg;
  p.embed = numerics::init_glorot(cfg.vocab_size, cfg.d_model, rng);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    Rng layer_rng = rng.split();
    p.layers.push_back(init_layer(cfg.layer_dims(), cfg.fusion, layer_rng));
  }
  p.unembed = TensorD::zeros(cfg.d_model, cfg.vocab_size);
  return p;
}

std::vector<ParamRef> param_refs(ModelParams& p) {
  std::vector<ParamRef> refs;
  visit_model(p, [&](const std::string& name, TensorD& t) { refs.push_back({name, &t}); });
  return refs;
}

std::size_t stored_float_count(const ModelParams& p) {
  std::size_t n = 0;
  visit_model(p, [&](const std::string&, const TensorD& t) { n += t.size(); });
  return n;
}

ModelVars bind_model(const ModelParams& p, std::span<const ad::Var> leaves) {
  std::size_t i = 0;
  auto next = [&](const TensorD&) {
    if (i >= leaves.size()) throw ShapeError("bind_model: too few leaves");
    return leaves[i++];
  };
  ModelVars v;
  v.config = p.config;
  v.embed = next(p.embed);
  for (const auto& layer : p.layers) v.layers.push_back(bind_layer(layer, next));
  v.unembed = next(p.unembed);
  if (i != leaves.size()) {
    throw ShapeError("bind_model: " + std::to_string(leaves.size()) + " leaves for " +
                     std::to_string(i) + " tensors");
  }
  return v;
}

ModelVars bind_parameters(ad::Graph& g, const ModelParams& p) {
  std::vector<ad::Var> leaves;
  visit_model(p, [&](const std::string&, const TensorD& t) { leaves.push_back(g.parameter(t)); });
  return bind_model(p, leaves);
}

ad::Var model_forward(const ModelVars& v, std::span<const int> tokens, std::size_t seq_len,
                      const ForwardOptions& opts) {
  if (tokens.empty() || seq_len == 0 || tokens.size() % seq_len != 0) {
    throw ShapeError("model_forward: " + std::to_string(tokens.size()) +
                     " tokens is not a positive multiple of seq_len " + std::to_string(seq_len));
  }
  ad::Var h = ad::embedding(v.embed, tokens);
  for (const auto& layer : v.layers) h = layer::forward(h, layer, seq_len, opts.layer);
  return ad::matmul(h, v.unembed);
}

TensorD model_forward(std::span<const int> tokens, const ModelParams& p,
                      const ForwardOptions& opts) {
  ad::Graph g(false);
  std::vector<ad::Var> leaves;
  visit_model(p, [&](const std::string&, const TensorD& t) { leaves.push_back(g.constant(t)); });
  const ModelVars v = bind_model(p, leaves);
  return model_forward(v, tokens, tokens.size(), opts).value();
}

TensorD plain_forward(std::span<const int> tokens, const ModelParams& p) {
  using numerics::matmul;
  const std::size_t n = tokens.size(), dm = p.config.d_model;
  TensorD h({n, dm}, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    if (tokens[t] < 0 || static_cast<std::size_t>(tokens[t]) >= p.config.vocab_size) {
      throw ShapeError("plain_forward: token id " + std::to_string(tokens[t]) +
                       " outside vocabulary");
    }
    auto src = p.embed.row(static_cast<std::size_t>(tokens[t]));
    std::copy(src.begin(), src.end(), h.row(t).begin());
  }
  for (const auto& layer : p.layers) {
    const TensorD x = numerics::layer_norm_rows(h, layer.ln1_scale, layer.ln1_shift, kLayerNormEps);
    std::vector<TensorD> heads;
    for (const auto& a : layer.attn) {
      const QKV qkv = attention::project_qkv(x, a);
      heads.push_back(attention::causal_head(qkv.q, qkv.k, qkv.v));
    }
    const TensorD w_top({dm, dm}, std::vector<double>(layer.w_attn.data().begin(),
                                                      layer.w_attn.data().begin() +
                                                          static_cast<std::ptrdiff_t>(dm * dm)));
    const TensorD h1 = numerics::add(h, matmul(numerics::concat_cols(heads), w_top));
    h = numerics::add(h1, ffn(h1, layer));
  }
  return matmul(h, p.unembed);
}

std::size_t ParamBreakdown::base() const noexcept {
  return base_embeddings + base_attention + base_ffn + base_layer_norm;
}

std::size_t ParamBreakdown::additions() const noexcept {
  return add_query_state + add_state_keys + add_state_inputs + add_state_values + add_middle +
         add_gates + add_projection + add_scalars;
}

double ParamBreakdown::ratio() const noexcept {
  return base() == 0 ? 0.0 : static_cast<double>(additions()) / static_cast<double>(base());
}

ParamBreakdown count_params(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t dm = cfg.d_model, dk = cfg.d_k(), H = cfg.n_heads, L = cfg.n_layers;
  const MiddleMode mid = cfg.fusion.middle;
  ParamBreakdown b;
  b.base_embeddings = 2 * cfg.vocab_size * dm;
  b.base_attention = L * (H * 3 * dm * dk + dm * dm);
  b.base_ffn = L * 2 * dm * cfg.d_ffn;
  b.base_layer_norm = L * 4 * dm;
  b.add_query_state = L * H * dk * dk;
  b.add_state_keys = L * H * dm * dk;
  b.add_state_inputs = L * H * (4 * dm * dk + 2 * dk);
  b.add_state_values = L * H * fusion::state_value_width(cfg.fusion, dm) * dk;
  if (mid != MiddleMode::kOff) {
    b.add_middle = L * H * dk * dk * (mid == MiddleMode::kAdditive ? 2 : 1);
    if (mid == MiddleMode::kGated) b.add_gates = L * H * 2 * dk * dk;
  }
  b.add_projection = L * (fusion::combined_width(cfg.fusion, dm) - dm) * dm;
  b.add_scalars = L * H * (mid == MiddleMode::kOff ? 2 : 4);
  return b;
}

}  // namespace wuneng
