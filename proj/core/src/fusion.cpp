#include "wuneng/fusion.hpp"

#include <string>

#include "wuneng/error.hpp"
#include "wuneng/numerics.hpp"

namespace wuneng {

std::string_view to_string(CombineMode m) {
  return m == CombineMode::kSum ? "sum" : "concat_project";
}

std::string_view to_string(MiddleMode m) {
  switch (m) {
    case MiddleMode::kOff:
      return "off";
    case MiddleMode::kConcat:
      return "concat";
    case MiddleMode::kAdditive:
      return "additive";
    case MiddleMode::kGated:
      return "gated";
  }
  return "off";
}

CombineMode parse_combine_mode(std::string_view s) {
  if (s == "concat_project") return CombineMode::kConcatProject;
  if (s == "sum") return CombineMode::kSum;
  throw ConfigError("unknown combine_mode '" + std::string(s) +
                    "' (expected concat_project or sum)");
}

MiddleMode parse_middle_mode(std::string_view s) {
  if (s == "off") return MiddleMode::kOff;
  if (s == "concat") return MiddleMode::kConcat;
  if (s == "additive") return MiddleMode::kAdditive;
  if (s == "gated") return MiddleMode::kGated;
  throw ConfigError("unknown middle_mode '" + std::string(s) +
                    "' (expected off, concat, additive or gated)");
}

namespace fusion {

using numerics::matmul;

std::size_t output_group_count(const FusionConfig& cfg) {
  return cfg.middle == MiddleMode::kConcat ? 3 : 2;
}

std::size_t combined_width(const FusionConfig& cfg, std::size_t d_model) {
  return cfg.combine == CombineMode::kSum ? d_model : d_model * output_group_count(cfg);
}

std::size_t state_value_width(const FusionConfig& cfg, std::size_t d_model) {
  if (cfg.combine == CombineMode::kSum || cfg.middle == MiddleMode::kOff) return d_model;
  return 2 * d_model;
}

namespace {

void check_groups(std::size_t n_groups, std::size_t n_heads_first,
                  const std::vector<std::size_t>& heads) {
  for (std::size_t g = 0; g < n_groups; ++g) {
    if (heads[g] != n_heads_first || heads[g] == 0) {
      throw ShapeError("combine_f: group " + std::to_string(g) + " has " +
                       std::to_string(heads[g]) + " heads, expected " +
                       std::to_string(n_heads_first));
    }
  }
}

}  // namespace

TensorD combine_f(std::span<const std::vector<TensorD>> groups, CombineMode mode) {
  if (groups.empty()) throw ShapeError("combine_f: no groups");
  std::vector<std::size_t> heads;
  for (const auto& g : groups) heads.push_back(g.size());
  check_groups(groups.size(), groups.front().size(), heads);
  const auto& ref = groups.front().front();
  for (const auto& g : groups) {
    for (const auto& h : g) {
      if (h.rows() != ref.rows() || h.cols() != ref.cols()) {
        throw ShapeError("combine_f: head output " + shape_string(h.dims()) + " vs " +
                         shape_string(ref.dims()));
      }
    }
  }
  if (mode == CombineMode::kConcatProject) {
    std::vector<TensorD> parts;
    for (const auto& g : groups) parts.insert(parts.end(), g.begin(), g.end());
    return numerics::concat_cols(parts);
  }
  TensorD out = numerics::concat_cols(groups.front());
  for (std::size_t g = 1; g < groups.size(); ++g) {
    out = numerics::add(out, numerics::concat_cols(groups[g]));
  }
  return out;
}

TensorD middle_head(const TensorD& a_h_t, const TensorD& state_read_t,
                    const MiddleHeadParams& p, MiddleMode mode,
                    std::optional<double> gate_override) {
  const std::size_t d_k = a_h_t.size();
  const double beta = p.beta[0];
  TensorD pre;
  switch (mode) {
    case MiddleMode::kOff:
      throw ShapeError("middle_head: mode is off");
    case MiddleMode::kConcat:
      pre = matmul(numerics::add(a_h_t, numerics::scale(state_read_t, beta)), p.w_mid);
      break;
    case MiddleMode::kAdditive:
      pre = numerics::add(matmul(a_h_t, p.w_mid),
                          numerics::scale(matmul(state_read_t, p.w_state_add), beta));
      break;
    case MiddleMode::kGated: {
      TensorD gate;
      if (gate_override) {
        gate = TensorD({d_k}, *gate_override);
      } else {
        const TensorD both[] = {a_h_t.reshaped({1, d_k}), state_read_t.reshaped({1, d_k})};
        gate = numerics::activation(ActivationKind::kSigmoid,
                                    matmul(numerics::concat_cols(both), p.w_gate))
                   .reshaped({d_k});
      }
      TensorD mixed({d_k}, 0.0);
      for (std::size_t j = 0; j < d_k; ++j) {
        mixed[j] = gate[j] * a_h_t[j] + (1.0 - gate[j]) * (beta * state_read_t[j]);
      }
      pre = matmul(mixed, p.w_mid);
      break;
    }
  }
  return numerics::activation(ActivationKind::kSigmoid, pre).reshaped({d_k});
}

TensorD hybrid_attention_out(const AttnOutput& a_heads,
                             std::span<const TensorD> state_reads,
                             std::span<const TensorD> middles,
                             const HybridProjection& proj,
                             std::span<const double> gamma_mid,
                             const FusionConfig& cfg) {
  const std::size_t n_heads = a_heads.per_head.size();
  const bool with_middle = cfg.middle != MiddleMode::kOff;
  if (state_reads.size() != n_heads || (with_middle && middles.size() != n_heads) ||
      (with_middle && gamma_mid.size() != n_heads)) {
    throw ShapeError("hybrid_attention_out: per-head inputs disagree on head count " +
                     std::to_string(n_heads));
  }
  std::vector<std::vector<TensorD>> groups(1);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const TensorD& a = a_heads.per_head[h];
    groups[0].push_back(with_middle ? numerics::add(a, numerics::scale(middles[h], gamma_mid[h]))
                                    : a);
  }
  groups.emplace_back(state_reads.begin(), state_reads.end());
  if (cfg.middle == MiddleMode::kConcat) groups.emplace_back(middles.begin(), middles.end());
  const TensorD combined = combine_f(groups, cfg.combine);
  if (combined.cols() != proj.w_attn.rows()) {
    throw ShapeError("hybrid_attention_out: combined width " +
                     std::to_string(combined.cols()) + " vs projection " +
                     shape_string(proj.w_attn.dims()));
  }
  return matmul(combined, proj.w_attn);
}

ad::Var combine(std::span<const std::vector<ad::Var>> groups, CombineMode mode) {
  if (groups.empty()) throw ShapeError("fusion::combine: no groups");
  if (mode == CombineMode::kConcatProject) {
    std::vector<ad::Var> parts;
    for (const auto& g : groups) parts.insert(parts.end(), g.begin(), g.end());
    return ad::concat_cols(parts);
  }
  ad::Var out = ad::concat_cols(groups.front());
  for (std::size_t g = 1; g < groups.size(); ++g) out = ad::add(out, ad::concat_cols(groups[g]));
  return out;
}

ad::Var middle_heads(ad::Var a_h, ad::Var state_read, const MiddleHeadT<ad::Var>& p,
                     MiddleMode mode) {
  switch (mode) {
    case MiddleMode::kConcat:
      return ad::sigmoid(ad::matmul(ad::add(a_h, ad::scale(state_read, p.beta)), p.w_mid));
    case MiddleMode::kAdditive:
      return ad::sigmoid(ad::add(ad::matmul(a_h, p.w_mid),
                                 ad::scale(ad::matmul(state_read, p.w_state_add), p.beta)));
    case MiddleMode::kGated: {
      const ad::Var both[] = {a_h, state_read};
      const ad::Var gate = ad::sigmoid(ad::matmul(ad::concat_cols(both), p.w_gate));
      const ad::Var mixed = ad::add(ad::mul(gate, a_h),
                                    ad::mul(ad::one_minus(gate), ad::scale(state_read, p.beta)));
      return ad::sigmoid(ad::matmul(mixed, p.w_mid));
    }
    case MiddleMode::kOff:
      break;
  }
  throw ShapeError("fusion::middle_heads: mode is off");
}

}  // namespace fusion
}  // namespace wuneng
