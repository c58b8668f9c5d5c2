// SPDX-License-Identifier: Apache-2.0
#include "engine/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/rng.hpp"
#include "engine/schedule.hpp"

namespace mgc {

using nlohmann::json;

namespace {

// Seed stream tags.
constexpr std::uint64_t kInitStream = 0x11;
constexpr std::uint64_t kShuffleStream = 0x22;
constexpr std::uint64_t kSampleStream = 0x33;
constexpr std::uint64_t kEvalClipStream = 0x44;

constexpr const char* kMetricsLog = "metrics.jsonl";

void emit(const std::function<void(const std::string&)>& f, const std::string& msg) {
  if (f) f(msg);
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// Keep only log lines belonging to epochs <= `epoch`.
void truncate_log(const std::filesystem::path& p, int epoch) {
  if (!std::filesystem::exists(p)) return;
  std::string kept;
  for (const auto& line : read_lines(p)) {
    if (line.empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || j.value("epoch", 0) > epoch) continue;
    kept += line + "\n";
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << kept;
}

nn::ModelParams<float> params_from_checkpoint(const Checkpoint& ck, const nn::Network<float>& net) {
  net.check_params(ck.params);
  return ck.params;
}

}  // namespace

RunData load_run_data(const RunConfig& cfg) {
  require(!cfg.data.manifest.empty(), ErrorKind::Validation, "data.manifest is not set");
  require(!cfg.data.embeddings.empty(), ErrorKind::Validation, "data.embeddings is not set");
  RunData d;
  d.manifest = load_manifest(cfg.data.manifest);
  const auto table = load_embedding_table(cfg.data.embeddings, cfg.data.embedding_dim);
  d.label_matrix = build_label_matrix(d.manifest.vocab, table);
  return d;
}

nn::NetworkConfig resolve_network(const RunConfig& cfg, const DatasetManifest& manifest) {
  auto net = cfg.network;
  net.in_channels = volume_channels(manifest.layout, cfg.volume.modality);
  net.n_classes = manifest.vocab.size();
  net.validate();
  return net;
}

nn::Activation<float> build_batch(const RunData& data, const RunConfig& cfg,
                                  std::span<const std::size_t> clips, SampleMode mode,
                                  std::span<const std::uint64_t> seeds) {
  require(mode == SampleMode::Test || seeds.size() == clips.size(), ErrorKind::InvalidArgument,
          "build_batch: train mode needs one seed per clip");
  const auto& vc = cfg.volume;
  const int channels = volume_channels(data.manifest.layout, vc.modality);
  nn::Activation<float> batch(static_cast<int>(clips.size()), channels, vc.frames, vc.height,
                              vc.width);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto vol = build_volume(data.manifest.clips[clips[i]], data.manifest.layout, vc, mode,
                                    mode == SampleMode::Train ? seeds[i] : 0);
      std::copy(vol.data.begin(), vol.data.end(), batch.sample(static_cast<int>(i)));
    }
  };
  std::size_t workers = cfg.runtime.workers == 0 ? std::thread::hardware_concurrency()
                                                 : static_cast<std::size_t>(cfg.runtime.workers);
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(clips.size(), 1));
  if (workers == 1) {
    work(0, clips.size());
    return batch;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (clips.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(clips.size(), b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
  for (auto& t : pool) t.join();
  return batch;
}

std::uint64_t clip_order_hash(const DatasetManifest& manifest, std::span<const std::size_t> clips) {
  Fnv1a h;
  for (auto i : clips) {
    h.update(manifest.clips[i].clip_id);
    h.update("\n");
  }
  return h.digest();
}

ScoreMatrix compute_scores(const RunData& data, const RunConfig& cfg,
                           const nn::Network<float>& net, const nn::ModelParams<float>& params,
                           Split split) {
  const auto clips = data.manifest.clip_indices(split);
  const int n = data.manifest.vocab.size();
  ScoreMatrix s;
  s.rows = static_cast<int>(clips.size());
  s.classes = n;
  s.vocab_hash = data.manifest.vocab.fingerprint();
  s.clips_hash = clip_order_hash(data.manifest, clips);
  s.scores.assign(clips.size() * static_cast<std::size_t>(n), 0.0f);
  for (auto i : clips) s.labels.push_back(data.manifest.clips[i].label_id);

  const auto bs = static_cast<std::size_t>(cfg.optimizer.batch_size);
  const int n_views = cfg.evaluation.num_clips;
  std::vector<double> acc(s.scores.size(), 0.0);
  for (std::size_t b = 0; b < clips.size(); b += bs) {
    const auto e = std::min(clips.size(), b + bs);
    std::span<const std::size_t> chunk(clips.data() + b, e - b);
    for (int view = 0; view < n_views; ++view) {
      nn::Activation<float> batch;
      if (view == 0) {
        batch = build_batch(data, cfg, chunk, SampleMode::Test);
      } else {
        std::vector<std::uint64_t> seeds;
        for (auto ci : chunk) {
          seeds.push_back(derive_seed(cfg.seed, {kEvalClipStream, ci, static_cast<std::uint64_t>(view)}));
        }
        batch = build_batch(data, cfg, chunk, SampleMode::Train, seeds);
      }
      const auto out = net.forward(params, batch, nn::Mode::Eval);
      const auto vals = cfg.fusion.scores == ScoreKind::Probabilities
                            ? nn::predict_scores<float>(out.logits, n)
                            : out.logits;
      for (std::size_t k = 0; k < vals.size(); ++k) acc[b * n + k] += vals[k];
    }
  }
  for (std::size_t k = 0; k < acc.size(); ++k) s.scores[k] = static_cast<float>(acc[k] / n_views);
  return s;
}

TrainResult train(const RunData& data, const RunConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  require(!options.out_dir.empty(), ErrorKind::InvalidArgument, "train: out_dir is required");
  const auto train_split = parse_split(cfg.data.train_split);
  const auto val_split = parse_split(cfg.data.val_split);
  const auto train_clips = data.manifest.clip_indices(train_split);
  require(!train_clips.empty(), ErrorKind::Validation,
          "train: split '" + cfg.data.train_split + "' has no clips");
  require(data.label_matrix.dim == cfg.network.sem_dim, ErrorKind::Validation,
          "train: label embedding dim " + std::to_string(data.label_matrix.dim) +
              " != network.sem_dim " + std::to_string(cfg.network.sem_dim));
  const auto val_clips = data.manifest.clip_indices(val_split);

  const nn::Network<float> net(resolve_network(cfg, data.manifest));
  const auto hash = config_hash(cfg);
  const auto& opt = cfg.optimizer;

  std::filesystem::create_directories(options.out_dir);
  TrainResult result;
  result.metrics_log = options.out_dir / kMetricsLog;
  result.last_checkpoint = options.out_dir / "last.ckpt";

  nn::ModelParams<float> params;
  OptimizerState<float> state;
  int start_epoch = 0;
  double best_val = -1.0;
  int best_epoch = 0;
  if (!options.resume_from.empty()) {
    const auto ck = read_checkpoint(options.resume_from);
    require(ck.config_hash == hash, ErrorKind::ResumeMismatch,
            "resume: checkpoint config hash " + ck.config_hash + " differs from run config " + hash);
    params = params_from_checkpoint(ck, net);
    state = OptimizerState<float>::zeros_like(params);
    if (!ck.velocity.empty()) state.velocity = ck.velocity;
    state.step = ck.global_step;
    start_epoch = ck.epoch;
    best_val = ck.best_val_top1;
    best_epoch = ck.best_epoch;
    truncate_log(result.metrics_log, start_epoch);
    emit(options.progress, "resumed at epoch " + std::to_string(start_epoch));
  } else {
    params = nn::init_params(net, derive_seed(cfg.seed, {kInitStream}));
    state = OptimizerState<float>::zeros_like(params);
    std::ofstream(result.metrics_log, std::ios::binary | std::ios::trunc);
  }
  write_run_config(cfg, options.out_dir / "config.json");

  const std::vector<float> label_matrix = data.label_matrix.values;
  std::ofstream log(result.metrics_log, std::ios::binary | std::ios::app);
  require(static_cast<bool>(log), ErrorKind::Io, "cannot open " + result.metrics_log.string());

  auto make_checkpoint = [&](int epoch) {
    Checkpoint ck;
    ck.config = config_to_json(cfg);
    ck.config_hash = hash;
    ck.seed = cfg.seed;
    ck.epoch = epoch;
    ck.global_step = state.step;
    ck.best_val_top1 = best_val;
    ck.best_epoch = best_epoch;
    ck.in_channels = net.config().in_channels;
    ck.n_classes = net.config().n_classes;
    ck.params = params;
    ck.velocity = state.velocity;
    return ck;
  };

  const auto bs = static_cast<std::size_t>(opt.batch_size);
  const std::size_t n_batches = (train_clips.size() + bs - 1) / bs;
  for (int epoch = start_epoch; epoch < opt.epochs; ++epoch) {
    auto order = train_clips;
    Rng(derive_seed(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)}))
        .shuffle(order.begin(), order.end());

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const auto begin = b * bs;
      const auto end = std::min(order.size(), begin + bs);
      std::span<const std::size_t> chunk(order.data() + begin, end - begin);
      std::vector<std::uint64_t> seeds;
      std::vector<int> labels;
      for (auto ci : chunk) {
        seeds.push_back(derive_seed(cfg.seed, {kSampleStream, static_cast<std::uint64_t>(epoch), ci}));
        labels.push_back(data.manifest.clips[ci].label_id);
      }
      const auto volumes = build_batch(data, cfg, chunk, SampleMode::Train, seeds);
      const double lr = cosine_lr(epoch + static_cast<double>(b) / n_batches, opt);
      const auto step = state.step;
      const auto loss = train_step<float>(net, params, state, {&volumes, labels}, label_matrix,
                                          cfg.objective.alpha, cfg.objective.emb_loss_reduction, lr, opt);
      result.last_loss = loss;
      loss_sum += loss.total * static_cast<double>(chunk.size());
      log << json{{"type", "step"},          {"epoch", epoch + 1},
                  {"step", step},            {"lr", lr},
                  {"class_loss", loss.class_loss}, {"emb_loss", loss.emb_loss},
                  {"total", loss.total}}
                 .dump()
          << "\n";
    }

    json epoch_line = {{"type", "epoch"},
                       {"epoch", epoch + 1},
                       {"train_loss", loss_sum / static_cast<double>(train_clips.size())}};
    bool improved = false;
    if (!val_clips.empty()) {
      const auto s = compute_scores(data, cfg, net, params, val_split);
      const double top1 = topk_accuracy(s.scores, s.classes, s.labels, 1);
      epoch_line["val_top1"] = top1;
      if (top1 > best_val) {
        best_val = top1;
        best_epoch = epoch + 1;
        improved = true;
      }
    }
    log << epoch_line.dump() << "\n";
    log.flush();

    const auto ck = make_checkpoint(epoch + 1);
    write_checkpoint(ck, result.last_checkpoint);
    if (improved) write_checkpoint(ck, options.out_dir / "best.ckpt");
    result.epochs_completed = epoch + 1;
    emit(options.progress, epoch_line.dump());

    if (options.stop_after_epoch > 0 && epoch + 1 >= options.stop_after_epoch &&
        epoch + 1 < opt.epochs) {
      result.best_val_top1 = best_val;
      result.best_checkpoint = val_clips.empty() ? std::filesystem::path{} : options.out_dir / "best.ckpt";
      return result;
    }
  }

  result.epochs_completed = opt.epochs;
  result.finished = true;
  result.final_checkpoint = options.out_dir / "final.ckpt";
  write_checkpoint(make_checkpoint(opt.epochs), result.final_checkpoint);
  result.best_checkpoint = val_clips.empty() ? result.final_checkpoint : options.out_dir / "best.ckpt";
  result.best_val_top1 = best_val;
  return result;
}

EvalResult evaluate_checkpoint(const RunData& data, const RunConfig& cfg, const Checkpoint& ckpt,
                               Split split) {
  auto model_cfg = config_from_json(ckpt.config);
  model_cfg.data = cfg.data;
  model_cfg.evaluation = cfg.evaluation;
  model_cfg.fusion = cfg.fusion;
  model_cfg.runtime = cfg.runtime;
  model_cfg.optimizer.batch_size = cfg.optimizer.batch_size;
  const nn::Network<float> net(resolve_network(model_cfg, data.manifest));
  require(net.config().in_channels == ckpt.in_channels && net.config().n_classes == ckpt.n_classes,
          ErrorKind::ShapeMismatch, "checkpoint was trained on a different layout or vocabulary");
  const auto params = params_from_checkpoint(ckpt, net);
  EvalResult r;
  r.scores = compute_scores(data, model_cfg, net, params, split);
  r.report = evaluate_scores(r.scores.scores, r.scores.classes, r.scores.labels);
  return r;
}

json report_to_json(const EvalReport& r, const LabelVocabulary& vocab) {
  json per_class = json::array();
  for (int c = 0; c < r.n_classes; ++c) {
    per_class.push_back({{"class", c},
                         {"label", c < vocab.size() ? vocab.id_to_text[c] : std::string()},
                         {"accuracy", r.per_class[c] ? json(*r.per_class[c]) : json(nullptr)}});
  }
  json confusion = json::array();
  for (int t = 0; t < r.n_classes; ++t) {
    json row = json::array();
    for (int p = 0; p < r.n_classes; ++p) row.push_back(r.confusion_at(t, p));
    confusion.push_back(std::move(row));
  }
  return {{"samples", r.samples}, {"top1", r.top1},           {"top5", r.top5},
          {"top5_k", std::min(5, r.n_classes)}, {"per_class", per_class}, {"confusion", confusion}};
}

std::string format_report(const EvalReport& r, const LabelVocabulary& vocab) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "samples: %d\nTop-1: %.2f%%\nTop-5: %.2f%%\n", r.samples,
                100.0 * r.top1, 100.0 * r.top5);
  os << buf << "per-class accuracy:\n";
  for (int c = 0; c < r.n_classes; ++c) {
    const auto& name = c < vocab.size() ? vocab.id_to_text[c] : std::string("?");
    if (r.per_class[c]) {
      std::snprintf(buf, sizeof(buf), "  %3d %-28s %6.2f%%\n", c, name.c_str(), 100.0 * *r.per_class[c]);
    } else {
      std::snprintf(buf, sizeof(buf), "  %3d %-28s    n/a\n", c, name.c_str());
    }
    os << buf;
  }
  return os.str();
}

std::vector<AblationRow> ablate_alpha(const RunData& data, const RunConfig& cfg,
                                      std::span<const double> alphas,
                                      const std::filesystem::path& out_dir,
                                      const std::function<void(const std::string&)>& progress) {
  require(!alphas.empty(), ErrorKind::InvalidArgument, "ablate: at least one alpha is required");
  const auto eval_split = parse_split(cfg.data.eval_split);
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    auto run_cfg = cfg;
    run_cfg.objective.alpha = alphas[i];
    run_cfg.validate();
    char name[64];
    std::snprintf(name, sizeof(name), "run%02zu_alpha_%g", i, alphas[i]);
    emit(progress, std::string("ablate: ") + name);
    TrainOptions opts;
    opts.out_dir = out_dir / name;
    opts.progress = progress;
    const auto tr = train(data, run_cfg, opts);
    const auto ck = read_checkpoint(tr.final_checkpoint);
    const auto ev = evaluate_checkpoint(data, run_cfg, ck, eval_split);
    write_scores(ev.scores, opts.out_dir / "scores.bin");
    rows.push_back({alphas[i], ev.report.top1, ev.report.top5});
  }
  return rows;
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
  std::ostringstream os;
  os << "Parameter    | Top-1 (%) | Top-5 (%)\n";
  os << "-------------+-----------+----------\n";
  char buf[128];
  for (const auto& r : rows) {
    char param[32];
    std::snprintf(param, sizeof(param), "alpha=%g", r.alpha);
    std::snprintf(buf, sizeof(buf), "%-12s | %9.2f | %9.2f\n", param, 100.0 * r.top1, 100.0 * r.top5);
    os << buf;
  }
  return os.str();
}

json ablation_to_json(std::span<const AblationRow> rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back({{"alpha", r.alpha}, {"top1", r.top1}, {"top5", r.top5}});
  return {{"table", "alpha_ablation"}, {"columns", {"alpha", "top1", "top5"}}, {"rows", arr}};
}

}  // namespace mgc
