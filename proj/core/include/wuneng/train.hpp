#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wuneng/model.hpp"
#include "wuneng/optim.hpp"
#include "wuneng/tasks.hpp"

namespace wuneng {

struct TrainConfig {
  TaskKind task = TaskKind::kCopy;
  std::size_t steps = 3000;
  std::size_t batch = 32;
  std::size_t seq_len = 32;
  AdamConfig adam;
  std::uint64_t seed = 1;
  /// Hold alpha, beta, gamma_mid and lambda at their initial values.
  bool pin_scalars = false;
  /// Stop once the mean batch accuracy over the last `stop_window` steps
  /// reaches this value; 0 disables early stopping.
  double stop_acc = 0.0;
  std::size_t stop_window = 20;
  /// Train the plain attention path only (see LayerOptions::plain).
  bool plain = false;
};

/// Metrics of the parameters *before* the update of that step.
struct StepRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double acc = 0.0;
  double ms = 0.0;
};

/// {"step":..,"loss":..,"acc":..[,"ms":..]}
std::string to_json_line(const StepRecord& r, bool with_ms);

struct TrainResult {
  std::vector<StepRecord> records;
  ModelParams params;
  bool stopped_early = false;
};

struct EvalResult {
  double loss = 0.0;
  double acc = 0.0;
  std::size_t samples = 0;
  std::size_t scored_tokens = 0;
};

/// Masked loss and argmax accuracy (ties resolve to the lowest id).
struct BatchMetrics {
  double loss = 0.0;
  double acc = 0.0;
  std::size_t scored = 0;
};

/// Stacks samples into one token batch.
struct Batch {
  std::vector<int> tokens;
  std::vector<int> targets;
  std::vector<double> mask;
  std::size_t seq_len = 0;
};
Batch make_batch(TaskKind task, Rng& rng, std::size_t batch, std::size_t seq_len,
                 std::size_t vocab);

double masked_accuracy(const TensorD& logits, const Batch& batch);

namespace train {

/// Adam on masked next-token cross-entropy with fresh samples every step.
/// Deterministic in (params, cfg). `on_step` sees each record as it is made.
/// Throws NumericAbort with the last finite step if the loss diverges.
TrainResult run(ModelParams params, const TrainConfig& cfg,
                const std::function<void(const StepRecord&)>& on_step = {});

/// Loss and accuracy on `n_samples` fresh samples drawn from `seed`.
EvalResult evaluate(const ModelParams& params, TaskKind task, std::size_t n_samples,
                    std::size_t seq_len, std::uint64_t seed, const ForwardOptions& opts = {});

/// Data stream seed derived from a run seed, shared by train and eval tools.
std::uint64_t data_seed(std::uint64_t run_seed);

}  // namespace train
}  // namespace wuneng
