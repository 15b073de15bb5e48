/*
 * Copyright 2026 The sardiff Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the sardiff toolkit: SAR-conditioned denoising diffusion
 * with colour supervision. All objects are opaque handles; every call returns
 * an sd_status and the message for the most recent failure on the calling
 * thread is available through sd_last_error().
 */
#ifndef SARDIFF_SARDIFF_H
#define SARDIFF_SARDIFF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SD_EXPORT __declspec(dllexport)
#else
#define SD_EXPORT __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sd_status {
  SD_OK = 0,
  SD_ERR_PARAMETER = 1,
  SD_ERR_SHAPE = 2,
  SD_ERR_INDEX = 3,
  SD_ERR_IO = 4,
  SD_ERR_DECODE = 5,
  SD_ERR_EMPTY_DATASET = 6,
  SD_ERR_NUMERIC = 7,
  SD_ERR_SCHEDULE_MISMATCH = 8,
  SD_ERR_FORMAT = 9,
  SD_ERR_INVALID_HANDLE = 10,
  SD_ERR_UNKNOWN = 99
} sd_status;

typedef enum sd_variance_mode { SD_VARIANCE_BETA = 0, SD_VARIANCE_BETA_TILDE = 1 } sd_variance_mode;

typedef struct sd_config_s* sd_config;
typedef struct sd_schedule_s* sd_schedule;
typedef struct sd_model_s* sd_model;

/* Receives one line of progress output (no trailing newline). */
typedef void (*sd_log_fn)(void* user, const char* line);

SD_EXPORT const char* sd_version(void);
SD_EXPORT const char* sd_status_name(sd_status status);
/* Message of the last failed call on this thread, "" if none. */
SD_EXPORT const char* sd_last_error(void);

/* ---- configuration ------------------------------------------------------ */

/* Loads a JSON run configuration; unknown keys are rejected. */
SD_EXPORT sd_status sd_config_load(const char* path, sd_config* out);
/* Built-in desk-scale defaults. */
SD_EXPORT sd_status sd_config_default(sd_config* out);
SD_EXPORT sd_status sd_config_destroy(sd_config cfg);
/* Writes the fully resolved configuration (defaults applied) as JSON. */
SD_EXPORT sd_status sd_config_write(sd_config cfg, const char* path);

/* ---- noise schedule ----------------------------------------------------- */

SD_EXPORT sd_status sd_schedule_create_linear(int32_t steps, double beta_start, double beta_end,
                                              sd_variance_mode mode, sd_schedule* out);
SD_EXPORT sd_status sd_schedule_from_config(sd_config cfg, sd_schedule* out);
SD_EXPORT sd_status sd_schedule_destroy(sd_schedule sched);
SD_EXPORT sd_status sd_schedule_length(sd_schedule sched, int32_t* steps);
/* t is 1-based. Any output pointer may be NULL. */
SD_EXPORT sd_status sd_schedule_at(sd_schedule sched, int32_t t, double* beta, double* alpha_bar,
                                   double* sigma);

/* ---- training ----------------------------------------------------------- */

typedef struct sd_train_options {
  /* Checkpoint to resume from, or NULL for a fresh run. */
  const char* resume_from;
  /* Stop after this global step (0 = run to the configured iteration count).
   * A checkpoint is always written at the stopping step. */
  int64_t stop_after;
  sd_log_fn log;
  void* log_user;
} sd_train_options;

/* Runs training and writes the path of the final checkpoint into out_path. */
SD_EXPORT sd_status sd_train(sd_config cfg, const sd_train_options* options, char* out_path,
                             size_t out_path_capacity);

/* ---- sampling ----------------------------------------------------------- */

SD_EXPORT sd_status sd_model_load(const char* checkpoint_path, sd_model* out);
SD_EXPORT sd_status sd_model_destroy(sd_model model);
/* Fails with SD_ERR_SCHEDULE_MISMATCH when cfg's schedule differs from the
 * one the checkpoint was trained with. */
SD_EXPORT sd_status sd_model_check_schedule(sd_model model, sd_config cfg);
SD_EXPORT sd_status sd_model_tile_size(sd_model model, int32_t* tile_size);
/* Nonzero: clamp the predicted x0 to [-1, 1] at every reverse step and derive
 * the noise estimate from it (off after sd_model_load). */
SD_EXPORT sd_status sd_model_set_clip_x0(sd_model model, int enabled);
/* Generates one optical PNG per SAR PNG. The noise for each tile depends only
 * on (seed, file name), so results do not depend on batching or order. */
SD_EXPORT sd_status sd_model_sample_files(sd_model model, const char* const* sar_paths,
                                          const char* const* out_paths, size_t count,
                                          uint64_t seed, sd_log_fn log, void* log_user);

/* ---- evaluation --------------------------------------------------------- */

typedef struct sd_metric_summary {
  size_t pairs;
  double mean_psnr; /* +inf when every pair is identical */
  double mean_ssim;
  int has_fid;
  double fid;
  char embedder[64];
} sd_metric_summary;

/* Pairs files by name across the two directories, writes a per-pair CSV to
 * csv_path (may be NULL) and fills summary. embedder may be NULL (no FID) or
 * a registered embedder name ("default" selects the built-in one). */
SD_EXPORT sd_status sd_evaluate_dirs(const char* generated_dir, const char* truth_dir,
                                     const char* csv_path, const char* embedder,
                                     sd_metric_summary* summary);
SD_EXPORT sd_status sd_format_summary(const sd_metric_summary* summary, char* buffer,
                                      size_t capacity);

/* ---- data --------------------------------------------------------------- */

/* Writes a procedurally generated paired fixture (s1/ and s2/ siblings). */
SD_EXPORT sd_status sd_make_fixture(const char* out_dir, int32_t pairs, int32_t tile_size,
                                    uint64_t seed);
/* Scans a dataset root and writes the manifest cache (one line per pair). */
SD_EXPORT sd_status sd_scan_dataset(sd_config cfg, const char* manifest_path, size_t* pairs,
                                    size_t* orphans);

#ifdef __cplusplus
}
#endif

#endif /* SARDIFF_SARDIFF_H */
