#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wuneng/attention.hpp"
#include "wuneng/autodiff.hpp"
#include "wuneng/tensor.hpp"

namespace wuneng {

/// How head groups are merged before the output projection.
enum class CombineMode {
  kConcatProject,  // concatenate every group, project the wide result
  kSum,            // concatenate heads within a group, sum across groups
};

/// Middle-head variant bridging attention and state readouts.
enum class MiddleMode { kOff, kConcat, kAdditive, kGated };

struct FusionConfig {
  CombineMode combine = CombineMode::kConcatProject;
  MiddleMode middle = MiddleMode::kGated;

  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

std::string_view to_string(CombineMode m);
std::string_view to_string(MiddleMode m);
/// Throw ConfigError on unknown names.
CombineMode parse_combine_mode(std::string_view s);
MiddleMode parse_middle_mode(std::string_view s);

/// Per-head middle-head parameters. Which tensors exist depends on the mode:
/// w_state_add only for additive, w_gate only for gated.
template <class T>
struct MiddleHeadT {
  T w_mid;        // d_k x d_k
  T w_state_add;  // d_k x d_k
  T w_gate;       // 2 d_k x d_k
  T beta;         // scalar on the state readout
  T gamma_mid;    // scalar on the middle-head modulation of A_h
};
using MiddleHeadParams = MiddleHeadT<TensorD>;

/// Output projection W_attn, d_cat x d_model.
struct HybridProjection {
  TensorD w_attn;
};

namespace fusion {

/// Head groups fed to the output projection: attention, state reads, and
/// middle heads in concat middle mode.
std::size_t output_group_count(const FusionConfig& cfg);
/// Rows of W_attn.
std::size_t combined_width(const FusionConfig& cfg, std::size_t d_model);
/// Width of F({A_h}) or F({A_h},{M_h}) that feeds the state value projection.
std::size_t state_value_width(const FusionConfig& cfg, std::size_t d_model);

/// F over head groups; each group is a list of n x d_k per-head outputs.
TensorD combine_f(std::span<const std::vector<TensorD>> groups, CombineMode mode);

/// One token of one middle head; sigma is the logistic sigmoid.
///
/// `gate_override` replaces the learned gate g in gated mode, which lets the
/// limits g -> 1 and g -> 0 be checked directly.
TensorD middle_head(const TensorD& a_h_t, const TensorD& state_read_t,
                    const MiddleHeadParams& p, MiddleMode mode,
                    std::optional<double> gate_override = std::nullopt);

/// a = W_attn F({A_h + gamma_h M_h}, {state reads}, [{M_h}]).
///
/// `middles` is empty when middle heads are off. State reads arrive already
/// scaled by alpha.
TensorD hybrid_attention_out(const AttnOutput& a_heads,
                             std::span<const TensorD> state_reads,
                             std::span<const TensorD> middles,
                             const HybridProjection& proj,
                             std::span<const double> gamma_mid,
                             const FusionConfig& cfg);

// Graph forms; per-head tensors are rows x d_k.
ad::Var combine(std::span<const std::vector<ad::Var>> groups, CombineMode mode);
ad::Var middle_heads(ad::Var a_h, ad::Var state_read, const MiddleHeadT<ad::Var>& p,
                     MiddleMode mode);

}  // namespace fusion
}  // namespace wuneng
