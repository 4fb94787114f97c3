#include "wuneng/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <nlohmann/json.hpp>

#include "wuneng/error.hpp"
#include "wuneng/numerics.hpp"

namespace wuneng::gradcheck {

GradientSet analytic_grads(const LossFn& loss, std::span<const ParamRef> params) {
  ad::Graph g(true);
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(g.parameter(*p.value));
  const ad::Var out = loss(g, leaves);
  g.backward(out);
  GradientSet grads;
  for (std::size_t i = 0; i < params.size(); ++i) {
    TensorD gr = g.grad(leaves[i]);
    if (!gr.all_finite()) {
      throw NumericError("non-finite gradient for tensor '" + params[i].name + "'");
    }
    grads.push_back({params[i].name, std::move(gr)});
  }
  return grads;
}

namespace {

double eval_loss(const LossFn& loss, std::span<const ParamRef> params) {
  ad::Graph g(false);
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(g.constant(*p.value));
  return loss(g, leaves).value()[0];
}

}  // namespace

GradientSet finite_diff(const LossFn& loss, std::span<const ParamRef> params, double h) {
  if (!(h > 0.0)) throw Error("finite_diff: step must be positive");
  GradientSet grads;
  for (const auto& p : params) {
    TensorD gr(p.value->dims(), 0.0);
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      const double saved = (*p.value)[i];
      (*p.value)[i] = saved + h;
      const double up = eval_loss(loss, params);
      (*p.value)[i] = saved - h;
      const double down = eval_loss(loss, params);
      (*p.value)[i] = saved;
      gr[i] = (up - down) / (2.0 * h);
    }
    grads.push_back({p.name, std::move(gr)});
  }
  return grads;
}

GradReport compare(const GradientSet& analytic, const GradientSet& numeric, double rel_tol,
                   double abs_tol) {
  if (analytic.size() != numeric.size()) {
    throw Error("compare: " + std::to_string(analytic.size()) + " analytic vs " +
                std::to_string(numeric.size()) + " numeric tensors");
  }
  GradReport report;
  for (std::size_t t = 0; t < analytic.size(); ++t) {
    const auto& a = analytic[t];
    const auto& n = numeric[t];
    if (a.name != n.name || a.value.dims() != n.value.dims()) {
      throw Error("compare: parameter sets differ at '" + a.name + "' vs '" + n.name + "'");
    }
    TensorGradRecord rec;
    rec.name = a.name;
    rec.analytic_norm = numerics::frobenius_norm(a.value);
    rec.numeric_norm = numerics::frobenius_norm(n.value);
    for (std::size_t i = 0; i < a.value.size(); ++i) {
      const double x = a.value[i], y = n.value[i];
      const double abs_err = std::abs(x - y);
      const double denom =
          std::max({std::abs(x), std::abs(y), std::numeric_limits<double>::min()});
      const double rel = abs_err / denom;
      rec.max_abs_error = std::max(rec.max_abs_error, abs_err);
      rec.max_rel_error = std::max(rec.max_rel_error, rel);
      if (!(rel <= rel_tol || abs_err <= abs_tol)) rec.pass = false;
    }
    report.pass = report.pass && rec.pass;
    report.records.push_back(std::move(rec));
  }
  return report;
}

std::string render_table(const GradReport& report) {
  std::size_t width = 6;
  for (const auto& r : report.records) width = std::max(width, r.name.size());
  std::string out;
  if (!report.label.empty()) out += "== " + report.label + " ==\n";
  char line[512];
  std::snprintf(line, sizeof(line), "%-*s %12s %12s %12s %12s %s\n", static_cast<int>(width),
                "tensor", "max_rel", "max_abs", "|analytic|", "|numeric|", "ok");
  out += line;
  for (const auto& r : report.records) {
    std::snprintf(line, sizeof(line), "%-*s %12.3e %12.3e %12.5e %12.5e %s\n",
                  static_cast<int>(width), r.name.c_str(), r.max_rel_error, r.max_abs_error,
                  r.analytic_norm, r.numeric_norm, r.pass ? "yes" : "NO");
    out += line;
  }
  out += report.pass ? "PASS\n" : "FAIL\n";
  return out;
}

std::string to_json(const GradReport& report) {
  nlohmann::json j;
  j["label"] = report.label;
  j["pass"] = report.pass;
  j["tensors"] = nlohmann::json::array();
  for (const auto& r : report.records) {
    j["tensors"].push_back({{"name", r.name},
                            {"max_rel_error", r.max_rel_error},
                            {"max_abs_error", r.max_abs_error},
                            {"analytic_norm", r.analytic_norm},
                            {"numeric_norm", r.numeric_norm},
                            {"pass", r.pass}});
  }
  return j.dump();
}

ModelParams perturbed_model(const ModelConfig& cfg) {
  ModelParams p = init_model(cfg);
  Rng rng(cfg.seed ^ 0x5CA1AB1EULL);
  for (auto& layer : p.layers) {
    for (auto& a : layer.attn) a.lambda[0] = rng.uniform(0.3, 0.9);
    for (auto& s : layer.state) s.alpha[0] = rng.uniform(0.3, 0.9);
    for (auto& m : layer.middle) {
      m.beta[0] = rng.uniform(0.3, 0.9);
      m.gamma_mid[0] = rng.uniform(0.3, 0.9);
    }
    for (auto* ln : {&layer.ln1_shift, &layer.ln2_shift}) {
      for (auto& v : ln->data()) v = rng.uniform(-0.1, 0.1);
    }
  }
  p.unembed = numerics::init_glorot(cfg.d_model, cfg.vocab_size, rng);
  return p;
}

GradReport check_model(const ModelConfig& cfg, const ModelCheckOptions& opts) {
  ModelParams params = perturbed_model(cfg);
  Rng data(opts.data_seed);
  const std::size_t n = opts.seq_len * opts.batch;
  std::vector<int> tokens(n), targets(n);
  std::vector<double> mask(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    tokens[i] = static_cast<int>(data.uniform_int(cfg.vocab_size));
    targets[i] = static_cast<int>(data.uniform_int(cfg.vocab_size));
  }
  // Leave one position out of the loss so masking is exercised too.
  mask[0] = 0.0;
  auto refs = param_refs(params);
  const LossFn loss = [&](ad::Graph&, std::span<const ad::Var> leaves) {
    const ModelVars v = bind_model(params, leaves);
    const ad::Var logits = model_forward(v, tokens, opts.seq_len);
    return ad::masked_cross_entropy(logits, targets, mask);
  };
  const GradientSet analytic = analytic_grads(loss, refs);
  const GradientSet numeric = finite_diff(loss, refs, opts.step);
  GradReport report = compare(analytic, numeric, opts.rel_tol, opts.abs_tol);
  report.label = std::string(to_string(cfg.fusion.combine)) + "/" +
                 std::string(to_string(cfg.fusion.middle));
  return report;
}

}  // namespace wuneng::gradcheck
