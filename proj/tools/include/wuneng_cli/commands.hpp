#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wuneng_cli/run_config.hpp"

namespace wuneng::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumeric = 2;

/// Trains and writes metrics.jsonl, timing.jsonl, model.ckpt and config.txt
/// into `out_dir`. Metrics files hold only replayable fields; wall time per
/// step goes to timing.jsonl and the stdout stream.
int cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out,
              std::ostream& err);

struct EvalOptions {
  TaskKind task = TaskKind::kCopy;
  std::size_t n = 256;
  std::size_t seq_len = 32;
  std::uint64_t seed = 7;
  std::optional<ModelConfig> expected;
};
int cmd_eval(const std::filesystem::path& checkpoint, const EvalOptions& opts, std::ostream& out,
             std::ostream& err);

/// The model shape the gradient suite uses when no config is given.
ModelConfig tiny_gradcheck_config();
/// Runs every combine x middle pairing on the shape of `base`.
/// `report`, when non-empty, also receives the JSON records.
int cmd_gradcheck(const ModelConfig& base, std::ostream& out, std::ostream& err,
                  const std::filesystem::path& report = {});

int cmd_params(const ModelConfig& cfg, std::ostream& out, std::ostream& err);

struct AblateOptions {
  std::vector<std::string> modes = {"off", "concat", "additive", "gated"};
  std::vector<std::uint64_t> seeds = {1};
  std::size_t eval_n = 256;
};

/// Result of one ablation run; `mode` is a middle mode name or "plain".
struct AblateRun {
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t params = 0;
  std::size_t steps_run = 0;
  double final_loss = 0.0;
  double final_acc = 0.0;
  double eval_acc = 0.0;
};

/// Trains `cfg` once per (mode, seed). "plain" keeps middle heads off and
/// trains only the attention path.
std::vector<AblateRun> run_ablation(const RunConfig& cfg, const AblateOptions& opts,
                                    std::ostream* progress = nullptr);
int cmd_ablate(const RunConfig& cfg, const AblateOptions& opts, std::ostream& out,
               std::ostream& err);

/// Full command-line entry point; never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wuneng::cli
