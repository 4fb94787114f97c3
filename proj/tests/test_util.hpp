#pragma once

#include <cstddef>
#include <cstdint>

#include "wuneng/attention.hpp"
#include "wuneng/fusion.hpp"
#include "wuneng/numerics.hpp"
#include "wuneng/rng.hpp"
#include "wuneng/state.hpp"
#include "wuneng/tensor.hpp"

namespace wuneng::testing {

inline TensorD random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  TensorD t({r, c}, 0.0);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline TensorD random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t({n}, 0.0);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline AttnHeadParams random_attn_head(std::size_t d_model, std::size_t d_k, Rng& rng,
                                       double lambda) {
  return {random_matrix(d_model, d_k, rng), random_matrix(d_model, d_k, rng),
          random_matrix(d_model, d_k, rng), random_matrix(d_k, d_k, rng),
          TensorD::scalar(lambda)};
}

inline StateParams random_state_params(std::size_t d_model, std::size_t d_fused, std::size_t d_k,
                                       Rng& rng, double alpha = 0.5) {
  StateParams p;
  p.w_decay = random_matrix(d_model, d_k, rng);
  p.b_decay = random_vector(d_k, rng);
  p.w_icl = random_matrix(d_model, d_k, rng);
  p.b_icl = random_vector(d_k, rng);
  p.w_kappa = random_matrix(d_model, d_k, rng);
  p.w_repl = random_matrix(d_model, d_k, rng);
  p.w_sv = random_matrix(d_fused, d_k, rng);
  p.w_hat_k = random_matrix(d_model, d_k, rng);
  p.alpha = TensorD::scalar(alpha);
  return p;
}

inline MiddleHeadParams random_middle(std::size_t d_k, Rng& rng, double beta, double gamma) {
  return {random_matrix(d_k, d_k, rng), random_matrix(d_k, d_k, rng),
          random_matrix(2 * d_k, d_k, rng), TensorD::scalar(beta), TensorD::scalar(gamma)};
}

}  // namespace wuneng::testing
