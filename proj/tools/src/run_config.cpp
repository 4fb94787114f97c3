#include "wuneng_cli/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wuneng/error.hpp"

namespace wuneng::cli {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t to_u64(std::string_view key, std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("key '" + std::string(key) + "': expected a non-negative integer, got '" +
                      std::string(s) + "'");
  }
  return v;
}

double to_double(std::string_view key, std::string_view s) {
  const std::string str(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (str.empty() || used != str.size()) {
    throw ConfigError("key '" + std::string(key) + "': expected a number, got '" + str + "'");
  }
  return v;
}

bool to_bool(std::string_view key, std::string_view s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ConfigError("key '" + std::string(key) + "': expected true/false, got '" +
                    std::string(s) + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = {
      "vocab_size", "d_model",   "n_heads",  "n_layers",    "d_ffn",       "combine_mode",
      "middle_mode", "seed",     "task",     "steps",       "batch",       "seq_len",
      "lr",         "beta1",     "beta2",    "eps",         "pin_scalars", "stop_acc",
      "stop_window", "plain",
  };
  return keys;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  auto& m = cfg.model;
  auto& t = cfg.train;
  if (key == "vocab_size") m.vocab_size = to_u64(key, value);
  else if (key == "d_model") m.d_model = to_u64(key, value);
  else if (key == "n_heads") m.n_heads = to_u64(key, value);
  else if (key == "n_layers") m.n_layers = to_u64(key, value);
  else if (key == "d_ffn") m.d_ffn = to_u64(key, value);
  else if (key == "combine_mode") m.fusion.combine = parse_combine_mode(value);
  else if (key == "middle_mode") m.fusion.middle = parse_middle_mode(value);
  else if (key == "seed") m.seed = t.seed = to_u64(key, value);
  else if (key == "task") t.task = parse_task(value);
  else if (key == "steps") t.steps = to_u64(key, value);
  else if (key == "batch") t.batch = to_u64(key, value);
  else if (key == "seq_len") t.seq_len = to_u64(key, value);
  else if (key == "lr") t.adam.lr = to_double(key, value);
  else if (key == "beta1") t.adam.beta1 = to_double(key, value);
  else if (key == "beta2") t.adam.beta2 = to_double(key, value);
  else if (key == "eps") t.adam.eps = to_double(key, value);
  else if (key == "pin_scalars") t.pin_scalars = to_bool(key, value);
  else if (key == "stop_acc") t.stop_acc = to_double(key, value);
  else if (key == "stop_window") t.stop_window = to_u64(key, value);
  else if (key == "plain") t.plain = to_bool(key, value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_setting(base, trim(std::string_view(body).substr(0, eq)),
                  trim(std::string_view(body).substr(eq + 1)));
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    apply_setting(cfg, trim(std::string_view(o).substr(0, eq)),
                  trim(std::string_view(o).substr(eq + 1)));
  }
}

std::string to_text(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& [k, v] : to_key_values(cfg.model)) out << k << " = " << v << '\n';
  const auto& t = cfg.train;
  out << "task = " << to_string(t.task) << '\n'
      << "steps = " << t.steps << '\n'
      << "batch = " << t.batch << '\n'
      << "seq_len = " << t.seq_len << '\n'
      << "lr = " << format_double(t.adam.lr) << '\n'
      << "beta1 = " << format_double(t.adam.beta1) << '\n'
      << "beta2 = " << format_double(t.adam.beta2) << '\n'
      << "eps = " << format_double(t.adam.eps) << '\n'
      << "pin_scalars = " << (t.pin_scalars ? "true" : "false") << '\n'
      << "stop_acc = " << format_double(t.stop_acc) << '\n'
      << "stop_window = " << t.stop_window << '\n'
      << "plain = " << (t.plain ? "true" : "false") << '\n';
  return out.str();
}

void validate(const RunConfig& cfg) {
  cfg.model.validate();
  const auto& t = cfg.train;
  if (t.batch == 0 || t.seq_len == 0) throw ConfigError("batch and seq_len must be positive");
  if (!(t.adam.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(t.adam.eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(t.adam.beta1 >= 0.0 && t.adam.beta1 < 1.0 && t.adam.beta2 >= 0.0 && t.adam.beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  tasks::validate_task(t.task, t.seq_len, cfg.model.vocab_size);
}

}  // namespace wuneng::cli
