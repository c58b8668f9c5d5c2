// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "engine/checkpoint.hpp"
#include "engine/metrics.hpp"
#include "engine/optimizer.hpp"
#include "engine/run_config.hpp"
#include "engine/score_file.hpp"
#include "pose_io/manifest.hpp"
#include "semantic/embedding.hpp"

namespace mgc {

/// Dataset plus label embeddings, loaded once and shared by train/eval.
struct RunData {
  DatasetManifest manifest;
  LabelEmbeddingMatrix label_matrix;
};

/// Loads data.manifest and data.embeddings from the config. Label-embedding
/// fallbacks are reported in label_matrix.warnings.
RunData load_run_data(const RunConfig& cfg);

/// Network config with in_channels/n_classes filled from the dataset.
nn::NetworkConfig resolve_network(const RunConfig& cfg, const DatasetManifest& manifest);

/// Builds an N x C x T x H x W batch for the given clips. Train mode draws
/// temporal samples from `seeds[i]`; test mode ignores the seeds.
nn::Activation<float> build_batch(const RunData& data, const RunConfig& cfg,
                                  std::span<const std::size_t> clips, SampleMode mode,
                                  std::span<const std::uint64_t> seeds = {});

struct TrainOptions {
  std::filesystem::path out_dir;
  /// Continue from this checkpoint (config hash must match).
  std::filesystem::path resume_from;
  /// > 0: return after this many completed epochs (checkpoint written).
  int stop_after_epoch = 0;
  std::function<void(const std::string&)> progress;
};

struct TrainResult {
  std::filesystem::path metrics_log;
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;   // equals final when there is no val split
  std::filesystem::path final_checkpoint;  // empty if stopped early
  int epochs_completed = 0;
  bool finished = false;
  LossBreakdown last_loss;
  double best_val_top1 = -1.0;
};

/// Seeded epoch loop: shuffled mini-batches, per-iteration cosine annealing,
/// SGD with momentum, per-step loss lines and per-epoch validation Top-1 in
/// `metrics.jsonl`; writes last/best/final checkpoints under out_dir.
TrainResult train(const RunData& data, const RunConfig& cfg, const TrainOptions& options);

/// Class scores (probabilities or logits per fusion.scores) for every clip
/// of a split, in manifest order.
ScoreMatrix compute_scores(const RunData& data, const RunConfig& cfg,
                           const nn::Network<float>& net, const nn::ModelParams<float>& params,
                           Split split);

struct EvalResult {
  ScoreMatrix scores;
  EvalReport report;
};

/// Evaluates a checkpoint. Volume/network settings come from the checkpoint's
/// own config; the split and clip count come from `cfg`.
EvalResult evaluate_checkpoint(const RunData& data, const RunConfig& cfg, const Checkpoint& ckpt,
                               Split split);

nlohmann::json report_to_json(const EvalReport& r, const LabelVocabulary& vocab);
std::string format_report(const EvalReport& r, const LabelVocabulary& vocab);

struct AblationRow {
  double alpha = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
};

/// One full train + eval per alpha, same seed for each, each run in its own
/// subdirectory of out_dir.
std::vector<AblationRow> ablate_alpha(const RunData& data, const RunConfig& cfg,
                                      std::span<const double> alphas,
                                      const std::filesystem::path& out_dir,
                                      const std::function<void(const std::string&)>& progress = {});

/// Plain-text table: Parameter | Top-1 (%) | Top-5 (%).
std::string format_ablation_table(std::span<const AblationRow> rows);
nlohmann::json ablation_to_json(std::span<const AblationRow> rows);

std::uint64_t clip_order_hash(const DatasetManifest& manifest, std::span<const std::size_t> clips);

}  // namespace mgc
