#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wuneng/autodiff.hpp"
#include "wuneng/model.hpp"
#include "wuneng/tensor.hpp"

namespace wuneng {

struct NamedTensor {
  std::string name;
  TensorD value;
};
using GradientSet = std::vector<NamedTensor>;

/// Builds a scalar loss on `g` from leaf vars bound to the parameters, in
/// the order the parameters were given.
using LossFn = std::function<ad::Var(ad::Graph& g, std::span<const ad::Var> leaves)>;

struct TensorGradRecord {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  bool pass = true;
};

struct GradReport {
  std::string label;
  std::vector<TensorGradRecord> records;
  bool pass = true;
};

namespace gradcheck {

/// Reverse-mode gradient of the loss for every parameter. Throws
/// NumericError naming the first tensor with a non-finite gradient.
GradientSet analytic_grads(const LossFn& loss, std::span<const ParamRef> params);

/// Central differences (f(x+h) - f(x-h)) / 2h, one scalar at a time. Each
/// parameter is restored bit-exactly after it is perturbed.
GradientSet finite_diff(const LossFn& loss, std::span<const ParamRef> params, double h = 1e-5);

/// Per-entry rel = |a - n| / max(|a|, |n|, tiny); an entry passes when
/// rel <= rel_tol or |a - n| <= abs_tol.
GradReport compare(const GradientSet& analytic, const GradientSet& numeric, double rel_tol,
                   double abs_tol);

/// Aligned text table, one row per tensor.
std::string render_table(const GradReport& report);
/// Single-line JSON object.
std::string to_json(const GradReport& report);

struct ModelCheckOptions {
  std::size_t seq_len = 5;
  std::size_t batch = 1;
  std::uint64_t data_seed = 11;
  double step = 1e-5;
  double rel_tol = 1e-4;
  double abs_tol = 1e-7;
};

/// Parameters for a gradient check: `init_model` followed by random
/// nonzero augmentation scalars and unembedding so every path carries
/// gradient.
ModelParams perturbed_model(const ModelConfig& cfg);

/// Masked cross-entropy of a model on fixed token data, with analytic and
/// finite-difference gradients compared for every stored tensor.
GradReport check_model(const ModelConfig& cfg, const ModelCheckOptions& opts = {});

}  // namespace gradcheck
}  // namespace wuneng
