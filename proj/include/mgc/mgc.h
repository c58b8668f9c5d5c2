/* SPDX-License-Identifier: Apache-2.0 */
/*
 * libmgc: micro-gesture classification from 2D skeleton clips.
 *
 * C interface over the C++ core. Objects are opaque handles released with
 * the matching *_free function. Every fallible call returns an mgc_status;
 * on failure mgc_last_error() holds a message for the calling thread.
 * Strings returned through char** are owned by the caller and released with
 * mgc_string_free().
 */
#ifndef MGC_MGC_H
#define MGC_MGC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MGC_BUILDING_LIBRARY)
#    define MGC_API __declspec(dllexport)
#  else
#    define MGC_API __declspec(dllimport)
#  endif
#else
#  define MGC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mgc_status {
  MGC_OK = 0,
  MGC_ERR_INVALID_ARGUMENT = 1,
  MGC_ERR_PARSE = 2,
  MGC_ERR_VALIDATION = 3,
  MGC_ERR_IO = 4,
  MGC_ERR_RUNTIME = 5,
  MGC_ERR_RESUME_MISMATCH = 6,
  MGC_ERR_NON_FINITE = 7,
  MGC_ERR_SHAPE_MISMATCH = 8
} mgc_status;

typedef struct mgc_manifest mgc_manifest;
typedef struct mgc_config mgc_config;
typedef struct mgc_scores mgc_scores;

typedef void (*mgc_progress_fn)(const char* message, void* user);

MGC_API const char* mgc_version(void);
MGC_API const char* mgc_last_error(void);
MGC_API const char* mgc_status_name(mgc_status status);
MGC_API void mgc_string_free(char* s);

/* ---- dataset manifests ---- */

MGC_API mgc_status mgc_manifest_load(const char* path, mgc_manifest** out);
/* holdout != 0 assigns subjects to train/val/test; 0 puts all in train. */
MGC_API mgc_status mgc_manifest_synthesize(int n_clips, int n_classes, const char* layout,
                                           uint64_t seed, int holdout, mgc_manifest** out);
MGC_API mgc_status mgc_manifest_write(const mgc_manifest* m, const char* path);
MGC_API int mgc_manifest_clip_count(const mgc_manifest* m);
MGC_API int mgc_manifest_class_count(const mgc_manifest* m);
MGC_API void mgc_manifest_free(mgc_manifest* m);

/* Writes manifest.json, embeddings.txt (synthetic 300-d vectors for every
 * label token) and config.json (desk preset pointing at both) to out_dir. */
MGC_API mgc_status mgc_synthesize_bundle(const char* out_dir, int n_clips, int n_classes,
                                         const char* layout, uint64_t seed, int holdout);

/* ---- run configuration ---- */

MGC_API mgc_status mgc_config_preset(const char* name, mgc_config** out);
MGC_API mgc_status mgc_config_load(const char* path, mgc_config** out);
/* assignment: "section.key=value", e.g. "objective.alpha=20". */
MGC_API mgc_status mgc_config_set(mgc_config* cfg, const char* assignment);
MGC_API mgc_status mgc_config_write(const mgc_config* cfg, const char* path);
MGC_API mgc_status mgc_config_to_json(const mgc_config* cfg, char** out_json);
MGC_API mgc_status mgc_config_hash(const mgc_config* cfg, char** out_hex);
MGC_API void mgc_config_free(mgc_config* cfg);

/* ---- training ---- */

typedef struct mgc_train_summary {
  int epochs_completed;
  int finished;
  double last_total_loss;
  double last_class_loss;
  double last_emb_loss;
  double best_val_top1; /* < 0 when there is no validation split */
} mgc_train_summary;

/* resume_checkpoint may be NULL. stop_after_epoch > 0 stops early after
 * writing last.ckpt. progress may be NULL. */
MGC_API mgc_status mgc_train(const mgc_config* cfg, const char* out_dir,
                             const char* resume_checkpoint, int stop_after_epoch,
                             mgc_progress_fn progress, void* user, mgc_train_summary* out);

/* ---- evaluation and scores ---- */

typedef struct mgc_eval_summary {
  int samples;
  int n_classes;
  double top1;
  double top5;
} mgc_eval_summary;

/* split may be NULL (uses data.eval_split). Writes scores.bin, report.json,
 * report.txt and config.json to out_dir. */
MGC_API mgc_status mgc_evaluate(const mgc_config* cfg, const char* checkpoint, const char* split,
                                const char* out_dir, mgc_eval_summary* out);

MGC_API mgc_status mgc_scores_load(const char* path, mgc_scores** out);
MGC_API mgc_status mgc_scores_write(const mgc_scores* s, const char* path);
MGC_API int mgc_scores_rows(const mgc_scores* s);
MGC_API int mgc_scores_classes(const mgc_scores* s);
/* w_joint * joint + w_limb * limb; both files must cover the same clips. */
MGC_API mgc_status mgc_scores_fuse(const mgc_scores* joint, const mgc_scores* limb,
                                   double w_joint, double w_limb, mgc_scores** out);
MGC_API mgc_status mgc_scores_evaluate(const mgc_scores* s, mgc_eval_summary* out);
MGC_API mgc_status mgc_scores_report_json(const mgc_scores* s, char** out_json);
MGC_API void mgc_scores_free(mgc_scores* s);

/* ---- alpha ablation ---- */

/* Trains and evaluates once per alpha; writes ablation.txt/.json to out_dir.
 * table_text may be NULL. */
MGC_API mgc_status mgc_ablate_alpha(const mgc_config* cfg, const double* alphas, size_t n_alphas,
                                    const char* out_dir, mgc_progress_fn progress, void* user,
                                    char** table_text);

/* ---- volume export ---- */

/* Dumps <clip_id>.vol for every clip of the split (NULL = data.eval_split);
 * export_images != 0 also writes per-frame PGM grids under images/. */
MGC_API mgc_status mgc_prepare(const mgc_config* cfg, const char* split, const char* out_dir,
                               int export_images, int* n_written);

#ifdef __cplusplus
}
#endif

#endif /* MGC_MGC_H */
