#include "wuneng/train.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <nlohmann/json.hpp>

#include "wuneng/error.hpp"

namespace wuneng {

std::string to_json_line(const StepRecord& r, bool with_ms) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["loss"] = r.loss;
  j["acc"] = r.acc;
  if (with_ms) j["ms"] = r.ms;
  return j.dump();
}

Batch make_batch(TaskKind task, Rng& rng, std::size_t batch, std::size_t seq_len,
                 std::size_t vocab) {
  Batch b;
  b.seq_len = seq_len;
  for (std::size_t i = 0; i < batch; ++i) {
    const TaskSample s = tasks::make_sample(task, rng, seq_len, vocab);
    b.tokens.insert(b.tokens.end(), s.input_ids.begin(), s.input_ids.end());
    b.targets.insert(b.targets.end(), s.target_ids.begin(), s.target_ids.end());
    b.mask.insert(b.mask.end(), s.loss_mask.begin(), s.loss_mask.end());
  }
  return b;
}

double masked_accuracy(const TensorD& logits, const Batch& batch) {
  double hit = 0.0, total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (batch.mask[r] == 0.0) continue;
    auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    total += batch.mask[r];
    if (static_cast<int>(best) == batch.targets[r]) hit += batch.mask[r];
  }
  return total > 0.0 ? hit / total : 0.0;
}

namespace train {

std::uint64_t data_seed(std::uint64_t run_seed) { return mix64(run_seed ^ 0xDA7A5EEDULL); }

namespace {

bool is_augmentation_scalar(const std::string& name) {
  for (const char* suffix : {".alpha", ".beta", ".gamma_mid", ".lambda"}) {
    const std::string s(suffix);
    if (name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0) {
      return true;
    }
  }
  return false;
}

}  // namespace

TrainResult run(ModelParams params, const TrainConfig& cfg,
                const std::function<void(const StepRecord&)>& on_step) {
  if (cfg.batch == 0 || cfg.seq_len == 0) throw ConfigError("batch and seq_len must be positive");
  if (!(cfg.adam.lr >= 0.0)) throw ConfigError("lr must be non-negative");
  tasks::validate_task(cfg.task, cfg.seq_len, params.config.vocab_size);

  TrainResult result;
  auto refs = param_refs(params);
  AdamState adam = AdamState::for_params(refs);
  std::unique_ptr<bool[]> frozen(new bool[refs.size()]);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    frozen[i] = cfg.pin_scalars && is_augmentation_scalar(refs[i].name);
  }
  ForwardOptions fwd;
  fwd.layer.plain = cfg.plain;
  Rng data(data_seed(cfg.seed));
  double window_sum = 0.0;
  std::vector<double> window;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    const Batch batch = make_batch(cfg.task, data, cfg.batch, cfg.seq_len,
                                   params.config.vocab_size);
    ad::Graph g(true);
    std::vector<ad::Var> leaves;
    leaves.reserve(refs.size());
    for (const auto& r : refs) leaves.push_back(g.parameter(*r.value));
    const ModelVars vars = bind_model(params, leaves);
    const ad::Var logits = model_forward(vars, batch.tokens, batch.seq_len, fwd);
    const ad::Var loss = ad::masked_cross_entropy(logits, batch.targets, batch.mask);
    const double loss_value = loss.value()[0];
    if (!std::isfinite(loss_value)) {
      throw NumericAbort("loss diverged at step " + std::to_string(step),
                         static_cast<long>(step) - 1);
    }
    StepRecord rec;
    rec.step = static_cast<std::int64_t>(step);
    rec.loss = loss_value;
    rec.acc = masked_accuracy(logits.value(), batch);

    g.backward(loss);
    GradientSet grads;
    grads.reserve(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) grads.push_back({refs[i].name, g.grad(leaves[i])});
    try {
      adam_step(refs, grads, adam, cfg.adam, std::span<const bool>(frozen.get(), refs.size()));
    } catch (const NumericError& e) {
      throw NumericAbort(std::string(e.what()) + " at step " + std::to_string(step),
                         static_cast<long>(step) - 1);
    }
    rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                 .count();
    result.records.push_back(rec);
    if (on_step) on_step(rec);

    if (cfg.stop_acc > 0.0 && cfg.stop_window > 0) {
      window.push_back(rec.acc);
      window_sum += rec.acc;
      if (window.size() > cfg.stop_window) {
        window_sum -= window.front();
        window.erase(window.begin());
      }
      if (window.size() == cfg.stop_window &&
          window_sum / static_cast<double>(cfg.stop_window) >= cfg.stop_acc) {
        result.stopped_early = true;
        break;
      }
    }
  }
  result.params = std::move(params);
  return result;
}

EvalResult evaluate(const ModelParams& params, TaskKind task, std::size_t n_samples,
                    std::size_t seq_len, std::uint64_t seed, const ForwardOptions& opts) {
  if (n_samples == 0) throw ConfigError("evaluation needs at least one sample");
  tasks::validate_task(task, seq_len, params.config.vocab_size);
  Rng rng(seed);
  EvalResult out;
  out.samples = n_samples;
  double loss_sum = 0.0, hit_sum = 0.0, scored = 0.0;
  // Chunks keep the graph small; metrics are token-weighted over all chunks.
  constexpr std::size_t kChunk = 64;
  for (std::size_t done = 0; done < n_samples; done += kChunk) {
    const std::size_t count = std::min(kChunk, n_samples - done);
    const Batch batch = make_batch(task, rng, count, seq_len, params.config.vocab_size);
    ad::Graph g(false);
    std::vector<ad::Var> leaves;
    visit_model(params, [&](const std::string&, const TensorD& t) { leaves.push_back(g.constant(t)); });
    const ModelVars vars = bind_model(params, leaves);
    const ad::Var logits = model_forward(vars, batch.tokens, seq_len, opts);
    const ad::Var loss = ad::masked_cross_entropy(logits, batch.targets, batch.mask);
    double n_scored = 0.0;
    for (double m : batch.mask) n_scored += m;
    loss_sum += loss.value()[0] * n_scored;
    hit_sum += masked_accuracy(logits.value(), batch) * n_scored;
    scored += n_scored;
  }
  out.scored_tokens = static_cast<std::size_t>(scored);
  out.loss = scored > 0.0 ? loss_sum / scored : 0.0;
  out.acc = scored > 0.0 ? hit_sum / scored : 0.0;
  return out;
}

}  // namespace train
}  // namespace wuneng
