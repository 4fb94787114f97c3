#pragma once

#include <cstdint>
#include <filesystem>

#include "wuneng/model.hpp"

namespace wuneng {

/// Binary checkpoint layout, all integers little-endian:
///
///   char[8]  magic "WUNENG01"
///   u32      format version (kCheckpointVersion)
///   u32      config length, then that many bytes of "key=value\n" lines
///   u32      tensor count
///   per tensor, in canonical order:
///     u32 name length, name bytes
///     u32 rank, then rank x u64 dims
///     product(dims) x f64 (IEEE-754 binary64)
inline constexpr char kCheckpointMagic[8] = {'W', 'U', 'N', 'E', 'N', 'G', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);

/// Loads the checkpoint and validates every tensor against the embedded config.
ModelParams load_checkpoint(const std::filesystem::path& path);

/// As above, and additionally requires the embedded config to produce the
/// same tensor shapes as `expected`.
ModelParams load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace wuneng
