// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "network/params.hpp"

namespace mgc {

/// On-disk layout (version 1):
///   8 bytes   magic "MGCCKPT1"
///   u64 LE    header length in bytes
///   header    UTF-8 JSON: format, version, config, config_hash, seed, epoch,
///             global_step, best_val_top1, best_epoch, in_channels, n_classes,
///             arrays[{name, kind: param|buffer|velocity, shape, offset, count}]
///   payload   little-endian f32 arrays at the recorded element offsets
struct Checkpoint {
  nlohmann::json config;
  std::string config_hash;
  std::uint64_t seed = 0;
  int epoch = 0;  // completed epochs
  std::int64_t global_step = 0;
  double best_val_top1 = -1.0;  // < 0 when no validation split
  int best_epoch = 0;
  int in_channels = 0;
  int n_classes = 0;
  nn::ModelParams<float> params;
  std::vector<std::vector<float>> velocity;  // aligned with params (empty for buffers)
};

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace mgc
