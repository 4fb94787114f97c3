#include "wuneng/optim.hpp"

#include <cmath>
#include <string>

#include "wuneng/error.hpp"

namespace wuneng {

AdamState AdamState::for_params(std::span<const ParamRef> params) {
  AdamState st;
  for (const auto& p : params) {
    st.m.emplace_back(p.value->dims(), 0.0);
    st.v.emplace_back(p.value->dims(), 0.0);
  }
  return st;
}

void adam_step(std::span<const ParamRef> params, const GradientSet& grads, AdamState& st,
               const AdamConfig& cfg, std::span<const bool> frozen) {
  if (grads.size() != params.size() || st.m.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " +
                     std::to_string(grads.size()) + " grads, " + std::to_string(st.m.size()) +
                     " moment slots");
  }
  const std::int64_t t = st.step + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  std::vector<TensorD> m_next(st.m), v_next(st.v), updates;
  updates.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const TensorD& g = grads[i].value;
    if (g.dims() != params[i].value->dims()) {
      throw ShapeError("adam_step: gradient for '" + params[i].name + "' has shape " +
                       shape_string(g.dims()));
    }
    TensorD upd(g.dims(), 0.0);
    if (frozen.empty() || !frozen[i]) {
      auto& m = m_next[i];
      auto& v = v_next[i];
      for (std::size_t j = 0; j < g.size(); ++j) {
        m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
        v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
        const double mhat = m[j] / c1;
        const double vhat = v[j] / c2;
        upd[j] = -cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      }
      if (!upd.all_finite()) {
        throw NumericError("adam_step: non-finite update for '" + params[i].name + "'");
      }
    }
    updates.push_back(std::move(upd));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i].value;
    for (std::size_t j = 0; j < p.size(); ++j) p[j] += updates[i][j];
  }
  st.m = std::move(m_next);
  st.v = std::move(v_next);
  st.step = t;
}

}  // namespace wuneng
