#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wuneng/gradcheck.hpp"
#include "wuneng/model.hpp"
#include "wuneng/tensor.hpp"

namespace wuneng {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments mirroring the parameter list, plus the number
/// of completed steps.
struct AdamState {
  std::vector<TensorD> m;
  std::vector<TensorD> v;
  std::int64_t step = 0;

  static AdamState for_params(std::span<const ParamRef> params);
};

/// One bias-corrected Adam update in place. Entries of `frozen` that are
/// true skip both the moment update and the parameter update. Throws
/// NumericError, leaving every parameter untouched, if any update is
/// non-finite.
void adam_step(std::span<const ParamRef> params, const GradientSet& grads, AdamState& st,
               const AdamConfig& cfg, std::span<const bool> frozen = {});

}  // namespace wuneng
