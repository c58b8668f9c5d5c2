// SPDX-License-Identifier: Apache-2.0
#include "mgc/mgc.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <set>
#include <string>

#include "common/error.hpp"
#include "engine/fusion.hpp"
#include "engine/metrics.hpp"
#include "engine/run_config.hpp"
#include "engine/score_file.hpp"
#include "engine/trainer.hpp"
#include "heatmap/volume.hpp"
#include "pose_io/synth.hpp"
#include "semantic/embedding.hpp"

struct mgc_manifest {
  mgc::DatasetManifest value;
};

struct mgc_config {
  mgc::RunConfig value;
};

struct mgc_scores {
  mgc::ScoreMatrix value;
};

namespace {

thread_local std::string g_last_error;

mgc_status to_status(mgc::ErrorKind k) { return static_cast<mgc_status>(k); }

template <typename F>
mgc_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return MGC_OK;
  } catch (const mgc::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return MGC_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MGC_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return MGC_ERR_RUNTIME;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) mgc::fail(mgc::ErrorKind::InvalidArgument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) mgc::fail(mgc::ErrorKind::Runtime, "out of memory");
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  mgc::require(static_cast<bool>(out), mgc::ErrorKind::Io, "cannot write " + p.string());
  out << text;
}

mgc::Split split_or_default(const mgc::RunConfig& cfg, const char* split) {
  return mgc::parse_split(split ? std::string(split) : cfg.data.eval_split);
}

void fill_eval(const mgc::EvalReport& r, mgc_eval_summary* out) {
  if (!out) return;
  out->samples = r.samples;
  out->n_classes = r.n_classes;
  out->top1 = r.top1;
  out->top5 = r.top5;
}

}  // namespace

extern "C" {

const char* mgc_version(void) { return "1.0.0"; }

const char* mgc_last_error(void) { return g_last_error.c_str(); }

const char* mgc_status_name(mgc_status s) {
  switch (s) {
    case MGC_OK: return "ok";
    case MGC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MGC_ERR_PARSE: return "parse error";
    case MGC_ERR_VALIDATION: return "validation error";
    case MGC_ERR_IO: return "i/o error";
    case MGC_ERR_RUNTIME: return "runtime error";
    case MGC_ERR_RESUME_MISMATCH: return "resume mismatch";
    case MGC_ERR_NON_FINITE: return "non-finite value";
    case MGC_ERR_SHAPE_MISMATCH: return "shape mismatch";
  }
  return "unknown";
}

void mgc_string_free(char* s) { std::free(s); }

// ---- manifests ----

mgc_status mgc_manifest_load(const char* path, mgc_manifest** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mgc_manifest{mgc::load_manifest(path)};
  });
}

mgc_status mgc_manifest_synthesize(int n_clips, int n_classes, const char* layout, uint64_t seed,
                                   int holdout, mgc_manifest** out) {
  return guarded([&] {
    need(layout, "layout");
    need(out, "out");
    mgc::SynthOptions opts;
    opts.holdout = holdout != 0;
    *out = new mgc_manifest{
        mgc::synthesize_dataset(n_clips, n_classes, mgc::builtin_layout(layout), seed, opts)};
  });
}

mgc_status mgc_manifest_write(const mgc_manifest* m, const char* path) {
  return guarded([&] {
    need(m, "manifest");
    need(path, "path");
    mgc::write_manifest(m->value, path);
  });
}

int mgc_manifest_clip_count(const mgc_manifest* m) {
  return m ? static_cast<int>(m->value.clips.size()) : 0;
}

int mgc_manifest_class_count(const mgc_manifest* m) { return m ? m->value.vocab.size() : 0; }

void mgc_manifest_free(mgc_manifest* m) { delete m; }

mgc_status mgc_synthesize_bundle(const char* out_dir, int n_clips, int n_classes,
                                 const char* layout, uint64_t seed, int holdout) {
  return guarded([&] {
    need(out_dir, "out_dir");
    need(layout, "layout");
    mgc::SynthOptions opts;
    opts.holdout = holdout != 0;
    const auto manifest =
        mgc::synthesize_dataset(n_clips, n_classes, mgc::builtin_layout(layout), seed, opts);

    std::vector<std::string> tokens;
    std::set<std::string> seen;
    for (const auto& text : manifest.vocab.id_to_text) {
      for (auto& t : mgc::label_tokens(text)) {
        if (seen.insert(t).second) tokens.push_back(t);
      }
    }
    const auto table = mgc::synthetic_embedding_table(tokens, mgc::kWordEmbeddingDim, seed);

    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    mgc::write_manifest(manifest, dir / "manifest.json");
    mgc::write_embedding_table(table, tokens, dir / "embeddings.txt");

    auto cfg = mgc::preset_config("desk");
    cfg.seed = seed;
    auto doc = mgc::config_to_json(cfg);
    doc["data"]["manifest"] = "manifest.json";
    doc["data"]["embeddings"] = "embeddings.txt";
    write_text(dir / "config.json", doc.dump(2) + "\n");
  });
}

// ---- config ----

mgc_status mgc_config_preset(const char* name, mgc_config** out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    *out = new mgc_config{mgc::preset_config(name)};
  });
}

mgc_status mgc_config_load(const char* path, mgc_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mgc_config{mgc::load_run_config(path)};
  });
}

mgc_status mgc_config_set(mgc_config* cfg, const char* assignment) {
  return guarded([&] {
    need(cfg, "config");
    need(assignment, "assignment");
    cfg->value = mgc::apply_override(cfg->value, assignment);
  });
}

mgc_status mgc_config_write(const mgc_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "config");
    need(path, "path");
    mgc::write_run_config(cfg->value, path);
  });
}

mgc_status mgc_config_to_json(const mgc_config* cfg, char** out_json) {
  return guarded([&] {
    need(cfg, "config");
    need(out_json, "out_json");
    *out_json = dup_string(mgc::config_to_json(cfg->value).dump(2));
  });
}

mgc_status mgc_config_hash(const mgc_config* cfg, char** out_hex) {
  return guarded([&] {
    need(cfg, "config");
    need(out_hex, "out_hex");
    *out_hex = dup_string(mgc::config_hash(cfg->value));
  });
}

void mgc_config_free(mgc_config* cfg) { delete cfg; }

// ---- training ----

mgc_status mgc_train(const mgc_config* cfg, const char* out_dir, const char* resume_checkpoint,
                     int stop_after_epoch, mgc_progress_fn progress, void* user,
                     mgc_train_summary* out) {
  return guarded([&] {
    need(cfg, "config");
    need(out_dir, "out_dir");
    const auto data = mgc::load_run_data(cfg->value);
    mgc::TrainOptions opts;
    opts.out_dir = out_dir;
    if (resume_checkpoint) opts.resume_from = resume_checkpoint;
    opts.stop_after_epoch = stop_after_epoch;
    if (progress) {
      for (const auto& w : data.label_matrix.warnings) progress(("warning: " + w).c_str(), user);
      opts.progress = [progress, user](const std::string& msg) { progress(msg.c_str(), user); };
    }
    const auto r = mgc::train(data, cfg->value, opts);
    if (out) {
      out->epochs_completed = r.epochs_completed;
      out->finished = r.finished ? 1 : 0;
      out->last_total_loss = r.last_loss.total;
      out->last_class_loss = r.last_loss.class_loss;
      out->last_emb_loss = r.last_loss.emb_loss;
      out->best_val_top1 = r.best_val_top1;
    }
  });
}

// ---- evaluation ----

mgc_status mgc_evaluate(const mgc_config* cfg, const char* checkpoint, const char* split,
                        const char* out_dir, mgc_eval_summary* out) {
  return guarded([&] {
    need(cfg, "config");
    need(checkpoint, "checkpoint");
    need(out_dir, "out_dir");
    const auto sp = split_or_default(cfg->value, split);
    const auto ck = mgc::read_checkpoint(checkpoint);
    const auto data = mgc::load_run_data(cfg->value);
    const auto r = mgc::evaluate_checkpoint(data, cfg->value, ck, sp);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    mgc::write_run_config(cfg->value, dir / "config.json");
    mgc::write_scores(r.scores, dir / "scores.bin");
    write_text(dir / "report.json", mgc::report_to_json(r.report, data.manifest.vocab).dump(2) + "\n");
    write_text(dir / "report.txt", mgc::format_report(r.report, data.manifest.vocab));
    fill_eval(r.report, out);
  });
}

mgc_status mgc_scores_load(const char* path, mgc_scores** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mgc_scores{mgc::read_scores(path)};
  });
}

mgc_status mgc_scores_write(const mgc_scores* s, const char* path) {
  return guarded([&] {
    need(s, "scores");
    need(path, "path");
    mgc::write_scores(s->value, path);
  });
}

int mgc_scores_rows(const mgc_scores* s) { return s ? s->value.rows : 0; }

int mgc_scores_classes(const mgc_scores* s) { return s ? s->value.classes : 0; }

mgc_status mgc_scores_fuse(const mgc_scores* joint, const mgc_scores* limb, double w_joint,
                           double w_limb, mgc_scores** out) {
  return guarded([&] {
    need(joint, "joint");
    need(limb, "limb");
    need(out, "out");
    mgc::check_fusable(joint->value, limb->value);
    mgc::FusionConfig f;
    f.weight_joint = w_joint;
    f.weight_limb = w_limb;
    auto fused = joint->value;
    fused.scores = mgc::fuse_scores(joint->value.scores, limb->value.scores, f);
    *out = new mgc_scores{std::move(fused)};
  });
}

mgc_status mgc_scores_evaluate(const mgc_scores* s, mgc_eval_summary* out) {
  return guarded([&] {
    need(s, "scores");
    need(out, "out");
    fill_eval(mgc::evaluate_scores(s->value.scores, s->value.classes, s->value.labels), out);
  });
}

mgc_status mgc_scores_report_json(const mgc_scores* s, char** out_json) {
  return guarded([&] {
    need(s, "scores");
    need(out_json, "out_json");
    const auto r = mgc::evaluate_scores(s->value.scores, s->value.classes, s->value.labels);
    *out_json = dup_string(mgc::report_to_json(r, mgc::LabelVocabulary{}).dump(2));
  });
}

void mgc_scores_free(mgc_scores* s) { delete s; }

// ---- ablation ----

mgc_status mgc_ablate_alpha(const mgc_config* cfg, const double* alphas, size_t n_alphas,
                            const char* out_dir, mgc_progress_fn progress, void* user,
                            char** table_text) {
  return guarded([&] {
    need(cfg, "config");
    need(out_dir, "out_dir");
    mgc::require(alphas != nullptr && n_alphas > 0, mgc::ErrorKind::InvalidArgument,
                 "at least one alpha is required");
    const auto data = mgc::load_run_data(cfg->value);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    mgc::write_run_config(cfg->value, dir / "config.json");
    std::function<void(const std::string&)> cb;
    if (progress) cb = [progress, user](const std::string& m) { progress(m.c_str(), user); };
    const auto rows = mgc::ablate_alpha(data, cfg->value, {alphas, n_alphas}, dir, cb);
    const auto table = mgc::format_ablation_table(rows);
    write_text(dir / "ablation.txt", table);
    write_text(dir / "ablation.json", mgc::ablation_to_json(rows).dump(2) + "\n");
    if (table_text) *table_text = dup_string(table);
  });
}

// ---- volume export ----

mgc_status mgc_prepare(const mgc_config* cfg, const char* split, const char* out_dir,
                       int export_images, int* n_written) {
  return guarded([&] {
    need(cfg, "config");
    need(out_dir, "out_dir");
    const auto sp = split_or_default(cfg->value, split);
    const auto manifest = mgc::load_manifest(cfg->value.data.manifest);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    mgc::write_run_config(cfg->value, dir / "config.json");
    int count = 0;
    for (auto i : manifest.clip_indices(sp)) {
      const auto& clip = manifest.clips[i];
      const auto vol = mgc::build_volume(clip, manifest.layout, cfg->value.volume);
      mgc::write_volume(vol, dir / (clip.clip_id + ".vol"));
      if (export_images) mgc::write_volume_frames_pgm(vol, dir / "images", clip.clip_id);
      ++count;
    }
    if (n_written) *n_written = count;
  });
}

}  // extern "C"
