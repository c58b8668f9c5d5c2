// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "engine/fusion.hpp"
#include "engine/schedule.hpp"
#include "heatmap/volume.hpp"
#include "network/network.hpp"
#include "objective/loss.hpp"

namespace mgc {

struct DataConfig {
  std::string manifest;
  std::string embeddings;
  int embedding_dim = 300;
  bool allow_dim_override = false;
  std::string train_split = "train";
  std::string val_split = "val";
  std::string eval_split = "test";

  bool operator==(const DataConfig&) const = default;
};

struct ObjectiveConfig {
  double alpha = 20.0;
  EmbReduction emb_loss_reduction = EmbReduction::Sum;

  bool operator==(const ObjectiveConfig&) const = default;
};

struct EvaluationConfig {
  /// 1 = the single deterministic uniform sample. Extra clips use seeded
  /// train-mode sampling and their scores are averaged.
  int num_clips = 1;

  bool operator==(const EvaluationConfig&) const = default;
};

struct RuntimeConfig {
  /// Threads building heatmap volumes; 0 = hardware concurrency. Results do
  /// not depend on it.
  int workers = 1;

  bool operator==(const RuntimeConfig&) const = default;
};

/// Every tunable of a run. `network.in_channels` and `network.n_classes` are
/// derived from the dataset at train time and are not part of the file.
struct RunConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  VolumeConfig volume;
  nn::NetworkConfig network;
  ObjectiveConfig objective;
  OptimizerConfig optimizer;
  FusionConfig fusion;
  EvaluationConfig evaluation;
  RuntimeConfig runtime;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// "desk" (CPU-sized default) or "full" (full-scale training schedule,
/// 56x56x48 volumes).
RunConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

nlohmann::json config_to_json(const RunConfig& cfg);

/// Overlays `doc` on the preset named by doc["preset"] (default "desk").
/// Unknown keys are rejected. Relative data paths resolve against `base_dir`.
RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

RunConfig load_run_config(const std::filesystem::path& path);
void write_run_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Applies "section.key=value" (value parsed as JSON, else taken as a
/// string). The key must already exist.
RunConfig apply_override(const RunConfig& cfg, std::string_view assignment);

/// Fingerprint of everything that influences results (excludes `runtime`).
std::string config_hash(const RunConfig& cfg);

}  // namespace mgc
