#include "wuneng_cli/commands.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "wuneng/checkpoint.hpp"
#include "wuneng/error.hpp"
#include "wuneng/gradcheck.hpp"

namespace wuneng::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  return f;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

int cmd_train(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out,
              std::ostream& err) {
  validate(cfg);
  fs::create_directories(out_dir);
  {
    auto snap = open_output(out_dir / "config.txt");
    snap << to_text(cfg);
  }
  auto metrics = open_output(out_dir / "metrics.jsonl");
  auto timing = open_output(out_dir / "timing.jsonl");
  const std::size_t every = std::max<std::size_t>(1, cfg.train.steps / 20);

  auto on_step = [&](const StepRecord& r) {
    metrics << to_json_line(r, false) << '\n';
    timing << json{{"step", r.step}, {"ms", r.ms}}.dump() << '\n';
    out << to_json_line(r, true) << '\n';
    if (static_cast<std::size_t>(r.step) % every == 0) {
      err << "step " << r.step << "  loss " << fixed(r.loss, 4) << "  acc " << fixed(r.acc, 4)
          << "  " << fixed(r.ms, 1) << " ms\n";
    }
  };

  TrainResult result;
  try {
    result = train::run(init_model(cfg.model), cfg.train, on_step);
  } catch (const NumericAbort& e) {
    metrics.flush();
    err << "numeric abort: " << e.what() << " (last good step " << e.last_good_step() << ")\n";
    out << json{{"abort", e.what()}, {"last_good_step", e.last_good_step()}}.dump() << '\n';
    return kExitNumeric;
  }
  save_checkpoint(out_dir / "model.ckpt", result.params);
  const auto& last = result.records.back();
  err << "finished " << result.records.size() << " steps"
      << (result.stopped_early ? " (early stop)" : "") << ", final acc " << fixed(last.acc, 4)
      << ", artifacts in " << out_dir.string() << '\n';
  return kExitOk;
}

int cmd_eval(const fs::path& checkpoint, const EvalOptions& opts, std::ostream& out,
             std::ostream& err) {
  if (opts.n == 0) throw ConfigError("--n must be at least 1");
  const ModelParams params =
      opts.expected ? load_checkpoint(checkpoint, *opts.expected) : load_checkpoint(checkpoint);
  const EvalResult r = train::evaluate(params, opts.task, opts.n, opts.seq_len, opts.seed);
  out << json{{"task", std::string(to_string(opts.task))},
              {"n", r.samples},
              {"seq_len", opts.seq_len},
              {"seed", opts.seed},
              {"loss", r.loss},
              {"acc", r.acc},
              {"scored_tokens", r.scored_tokens}}
             .dump()
      << '\n';
  err << to_string(opts.task) << ": acc " << fixed(r.acc, 4) << ", loss " << fixed(r.loss, 4)
      << " over " << r.samples << " samples\n";
  return kExitOk;
}

ModelConfig tiny_gradcheck_config() {
  ModelConfig c;
  c.vocab_size = 6;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 2;
  c.d_ffn = 16;
  c.seed = 3;
  return c;
}

int cmd_gradcheck(const ModelConfig& base, std::ostream& out, std::ostream& err,
                  const fs::path& report) {
  std::ofstream report_file;
  if (!report.empty()) report_file = open_output(report);
  bool all_pass = true;
  for (CombineMode combine : {CombineMode::kConcatProject, CombineMode::kSum}) {
    for (MiddleMode middle :
         {MiddleMode::kOff, MiddleMode::kConcat, MiddleMode::kAdditive, MiddleMode::kGated}) {
      ModelConfig c = base;
      c.fusion = {combine, middle};
      const GradReport r = gradcheck::check_model(c);
      all_pass = all_pass && r.pass;
      err << gradcheck::render_table(r) << '\n';
      out << gradcheck::to_json(r) << '\n';
      if (report_file.is_open()) report_file << gradcheck::to_json(r) << '\n';
    }
  }
  err << (all_pass ? "gradient check passed" : "gradient check FAILED") << '\n';
  return all_pass ? kExitOk : kExitNumeric;
}

int cmd_params(const ModelConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.validate();
  const ParamBreakdown b = count_params(cfg);
  const std::vector<std::pair<std::string, std::size_t>> rows = {
      {"base_embeddings", b.base_embeddings}, {"base_attention", b.base_attention},
      {"base_ffn", b.base_ffn},               {"base_layer_norm", b.base_layer_norm},
      {"add_query_state", b.add_query_state}, {"add_state_keys", b.add_state_keys},
      {"add_state_inputs", b.add_state_inputs}, {"add_state_values", b.add_state_values},
      {"add_middle", b.add_middle},           {"add_gates", b.add_gates},
      {"add_projection", b.add_projection},   {"add_scalars", b.add_scalars},
  };
  json j;
  for (const auto& [name, n] : rows) {
    j[name] = n;
    char line[96];
    std::snprintf(line, sizeof line, "%-18s %12zu\n", name.c_str(), n);
    err << line;
  }
  j["base"] = b.base();
  j["additions"] = b.additions();
  j["total"] = b.total();
  j["ratio"] = b.ratio();
  err << "base " << b.base() << ", additions " << b.additions() << ", ratio "
      << fixed(100.0 * b.ratio(), 2) << "%\n";
  out << j.dump() << '\n';
  return kExitOk;
}

std::vector<AblateRun> run_ablation(const RunConfig& cfg, const AblateOptions& opts,
                                    std::ostream* progress) {
  std::vector<AblateRun> runs;
  for (const auto& mode : opts.modes) {
    for (std::uint64_t seed : opts.seeds) {
      RunConfig c = cfg;
      c.model.seed = c.train.seed = seed;
      c.train.plain = mode == "plain";
      c.model.fusion.middle = c.train.plain ? MiddleMode::kOff : parse_middle_mode(mode);
      validate(c);
      if (progress) *progress << "ablate: mode " << mode << ", seed " << seed << '\n';
      const TrainResult r = train::run(init_model(c.model), c.train);
      AblateRun run;
      run.mode = mode;
      run.seed = seed;
      run.params = count_params(c.model).total();
      run.steps_run = r.records.size();
      run.final_loss = r.records.back().loss;
      run.final_acc = r.records.back().acc;
      ForwardOptions fwd;
      fwd.layer.plain = c.train.plain;
      run.eval_acc = train::evaluate(r.params, c.train.task, opts.eval_n, c.train.seq_len,
                                     train::data_seed(seed) + 1, fwd)
                         .acc;
      runs.push_back(run);
    }
  }
  return runs;
}

int cmd_ablate(const RunConfig& cfg, const AblateOptions& opts, std::ostream& out,
               std::ostream& err) {
  if (opts.modes.empty() || opts.seeds.empty()) throw ConfigError("need at least one mode and seed");
  const auto runs = run_ablation(cfg, opts, &err);
  std::map<std::string, std::pair<double, std::size_t>> mean;
  for (const auto& r : runs) {
    out << json{{"mode", r.mode},         {"seed", r.seed},           {"params", r.params},
                {"steps", r.steps_run},   {"final_loss", r.final_loss}, {"final_acc", r.final_acc},
                {"eval_acc", r.eval_acc}}
               .dump()
        << '\n';
    auto& m = mean[r.mode];
    m.first += r.eval_acc;
    ++m.second;
  }
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %10s %10s\n", "mode", "params", "eval_acc");
  err << line;
  for (const auto& mode : opts.modes) {
    const auto it = mean.find(mode);
    if (it == mean.end()) continue;
    RunConfig c = cfg;
    c.model.fusion.middle = mode == "plain" ? MiddleMode::kOff : parse_middle_mode(mode);
    std::snprintf(line, sizeof line, "%-10s %10zu %10.4f\n", mode.c_str(),
                  count_params(c.model).total(),
                  it->second.first / static_cast<double>(it->second.second));
    err << line;
  }
  return kExitOk;
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

RunConfig resolve(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  apply_overrides(cfg, overrides);
  return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"WuNeng hybrid attention/state model toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, task = "copy", modes = "off,concat,additive,gated",
                                                 seeds = "1";
  std::vector<std::string> overrides;
  EvalOptions eval_opts;
  AblateOptions ablate_opts;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write run artifacts");
  train_cmd->add_option("config", config_path, "key = value config file")->required();
  train_cmd->add_option("--out", out_dir, "Output directory")->required();
  train_cmd->add_option("--set", overrides, "Override a config key (key=value)");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on fresh samples");
  eval_cmd->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--task", task, "copy, assoc_recall or perm_compose");
  eval_cmd->add_option("--n", eval_opts.n, "Number of samples");
  eval_cmd->add_option("--seq-len", eval_opts.seq_len, "Sequence length");
  eval_cmd->add_option("--seed", eval_opts.seed, "Sample seed");
  eval_cmd->add_option("--config", config_path, "Config the checkpoint must match");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad_cmd->add_option("config", config_path, "Config file (default: tiny model)");
  grad_cmd->add_option("--set", overrides, "Override a config key (key=value)");
  std::string report_path;
  grad_cmd->add_option("--report", report_path, "Also write the JSON records to this file");

  auto* params_cmd = app.add_subcommand("params", "Parameter accounting");
  params_cmd->add_option("config", config_path, "Config file");
  params_cmd->add_option("--set", overrides, "Override a config key (key=value)");

  auto* ablate_cmd = app.add_subcommand("ablate", "Compare middle modes on matched seeds");
  ablate_cmd->add_option("config", config_path, "Config file")->required();
  ablate_cmd->add_option("--modes", modes, "Comma list of off, concat, additive, gated, plain");
  ablate_cmd->add_option("--seeds", seeds, "Comma list of seeds");
  ablate_cmd->add_option("--eval-n", ablate_opts.eval_n, "Evaluation samples per run");
  ablate_cmd->add_option("--set", overrides, "Override a config key (key=value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, err, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(resolve(config_path, overrides), out_dir, out, err);
    if (*eval_cmd) {
      eval_opts.task = parse_task(task);
      if (!config_path.empty()) eval_opts.expected = load_run_config(config_path).model;
      return cmd_eval(checkpoint, eval_opts, out, err);
    }
    if (*grad_cmd) {
      const ModelConfig base = config_path.empty() && overrides.empty()
                                   ? tiny_gradcheck_config()
                                   : resolve(config_path, overrides).model;
      return cmd_gradcheck(base, out, err, report_path);
    }
    if (*params_cmd) return cmd_params(resolve(config_path, overrides).model, out, err);
    if (*ablate_cmd) {
      ablate_opts.modes = split_list(modes);
      ablate_opts.seeds.clear();
      for (const auto& s : split_list(seeds)) {
        RunConfig probe;
        apply_setting(probe, "seed", s);
        ablate_opts.seeds.push_back(probe.train.seed);
      }
      return cmd_ablate(resolve(config_path, overrides), ablate_opts, out, err);
    }
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace wuneng::cli
