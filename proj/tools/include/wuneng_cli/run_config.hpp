#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "wuneng/model.hpp"
#include "wuneng/train.hpp"

namespace wuneng::cli {

/// Everything a command needs: model shape plus training settings. `seed`
/// drives both parameter initialization and the data stream.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

/// Documented keys, in the order they are written to snapshots.
const std::vector<std::string>& run_config_keys();

/// Applies one `key = value` assignment. Unknown keys and malformed values
/// throw ConfigError naming the key.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies `key=value` overrides in order.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

/// Canonical text form; parse_run_config(to_text(c)) == c.
std::string to_text(const RunConfig& cfg);

/// Throws ConfigError if the combination cannot run.
void validate(const RunConfig& cfg);

}  // namespace wuneng::cli
