// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <string>

#include "checkpoint.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "fixture.hpp"
#include "metrics.hpp"
#include "sampler.hpp"
#include "sardiff/sardiff.h"
#include "trainer.hpp"

struct sd_config_s {
  sardiff::TrainConfig cfg;
};
struct sd_schedule_s {
  sardiff::NoiseSchedule sched;
};
struct sd_model_s {
  sardiff::TrainedModel model;
  bool clip_x0 = false;
};

namespace {

thread_local std::string g_last_error;

sd_status fail(sd_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <class F>
sd_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return SD_OK;
  } catch (const sardiff::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SD_ERR_UNKNOWN, "out of memory");
  } catch (const std::exception& e) {
    return fail(SD_ERR_UNKNOWN, e.what());
  } catch (...) {
    return fail(SD_ERR_UNKNOWN, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw sardiff::ParameterError(std::string(what) + " must not be NULL");
}

void copy_out(const std::string& s, char* buf, std::size_t cap, const char* what) {
  if (!buf || cap == 0) throw sardiff::ParameterError(std::string(what) + ": no output buffer");
  if (s.size() + 1 > cap)
    throw sardiff::ParameterError(std::string(what) + ": buffer too small (need " +
                                  std::to_string(s.size() + 1) + " bytes)");
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

std::function<void(const std::string&)> wrap_log(sd_log_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const std::string& line) { fn(user, line.c_str()); };
}

}  // namespace

#define SD_HANDLE(h, what)                                                     \
  do {                                                                         \
    if (!(h)) return fail(SD_ERR_INVALID_HANDLE, what " handle is NULL");      \
  } while (0)

extern "C" {

SD_EXPORT const char* sd_version(void) { return "0.1.0"; }

SD_EXPORT const char* sd_status_name(sd_status s) {
  switch (s) {
    case SD_OK: return "ok";
    case SD_ERR_PARAMETER: return "parameter error";
    case SD_ERR_SHAPE: return "shape error";
    case SD_ERR_INDEX: return "index error";
    case SD_ERR_IO: return "I/O error";
    case SD_ERR_DECODE: return "decode error";
    case SD_ERR_EMPTY_DATASET: return "empty dataset";
    case SD_ERR_NUMERIC: return "numeric error";
    case SD_ERR_SCHEDULE_MISMATCH: return "schedule mismatch";
    case SD_ERR_FORMAT: return "format error";
    case SD_ERR_INVALID_HANDLE: return "invalid handle";
    case SD_ERR_UNKNOWN: return "unknown error";
  }
  return "unknown error";
}

SD_EXPORT const char* sd_last_error(void) { return g_last_error.c_str(); }

SD_EXPORT sd_status sd_config_load(const char* path, sd_config* out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new sd_config_s{sardiff::load_config(path)};
  });
}

SD_EXPORT sd_status sd_config_default(sd_config* out) {
  return guarded([&] {
    require(out, "out");
    *out = new sd_config_s{};
  });
}

SD_EXPORT sd_status sd_config_destroy(sd_config cfg) {
  delete cfg;
  return SD_OK;
}

SD_EXPORT sd_status sd_config_write(sd_config cfg, const char* path) {
  SD_HANDLE(cfg, "config");
  return guarded([&] {
    require(path, "path");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw sardiff::IoError(std::string("cannot write ") + path);
    out << sardiff::to_json(cfg->cfg);
    if (!out) throw sardiff::IoError(std::string("error writing ") + path);
  });
}

SD_EXPORT sd_status sd_schedule_create_linear(int32_t steps, double beta_start, double beta_end,
                                              sd_variance_mode mode, sd_schedule* out) {
  return guarded([&] {
    require(out, "out");
    if (mode != SD_VARIANCE_BETA && mode != SD_VARIANCE_BETA_TILDE)
      throw sardiff::ParameterError("variance_mode: unknown value");
    const auto vm = mode == SD_VARIANCE_BETA ? sardiff::VarianceMode::kBeta
                                             : sardiff::VarianceMode::kBetaTilde;
    *out = new sd_schedule_s{sardiff::make_linear_schedule(steps, beta_start, beta_end, vm)};
  });
}

SD_EXPORT sd_status sd_schedule_from_config(sd_config cfg, sd_schedule* out) {
  SD_HANDLE(cfg, "config");
  return guarded([&] {
    require(out, "out");
    *out = new sd_schedule_s{cfg->cfg.schedule.build()};
  });
}

SD_EXPORT sd_status sd_schedule_destroy(sd_schedule sched) {
  delete sched;
  return SD_OK;
}

SD_EXPORT sd_status sd_schedule_length(sd_schedule sched, int32_t* steps) {
  SD_HANDLE(sched, "schedule");
  return guarded([&] {
    require(steps, "steps");
    *steps = sched->sched.steps();
  });
}

SD_EXPORT sd_status sd_schedule_at(sd_schedule sched, int32_t t, double* beta, double* alpha_bar,
                                   double* sigma) {
  SD_HANDLE(sched, "schedule");
  return guarded([&] {
    sched->sched.check_step(t);
    if (beta) *beta = sched->sched.beta(t);
    if (alpha_bar) *alpha_bar = sched->sched.alpha_bar(t);
    if (sigma) *sigma = sched->sched.sigma(t);
  });
}

SD_EXPORT sd_status sd_train(sd_config cfg, const sd_train_options* options, char* out_path,
                             size_t cap) {
  SD_HANDLE(cfg, "config");
  return guarded([&] {
    sardiff::TrainOptions opts;
    if (options) {
      if (options->resume_from) opts.resume_from = options->resume_from;
      if (options->stop_after < 0) throw sardiff::ParameterError("stop_after must be >= 0");
      opts.stop_after = options->stop_after;
      opts.log = wrap_log(options->log, options->log_user);
    }
    const auto result = sardiff::train(cfg->cfg, opts);
    if (out_path) copy_out(result.checkpoint.string(), out_path, cap, "out_path");
  });
}

SD_EXPORT sd_status sd_model_load(const char* path, sd_model* out) {
  return guarded([&] {
    require(path, "checkpoint_path");
    require(out, "out");
    *out = new sd_model_s{sardiff::TrainedModel::load(path)};
  });
}

SD_EXPORT sd_status sd_model_destroy(sd_model model) {
  delete model;
  return SD_OK;
}

SD_EXPORT sd_status sd_model_check_schedule(sd_model model, sd_config cfg) {
  SD_HANDLE(model, "model");
  SD_HANDLE(cfg, "config");
  return guarded([&] {
    sardiff::require_same_schedule(model->model.checkpoint().schedule, cfg->cfg.schedule);
  });
}

SD_EXPORT sd_status sd_model_tile_size(sd_model model, int32_t* tile_size) {
  SD_HANDLE(model, "model");
  return guarded([&] {
    require(tile_size, "tile_size");
    *tile_size = model->model.checkpoint().tile_size;
  });
}

SD_EXPORT sd_status sd_model_set_clip_x0(sd_model model, int enabled) {
  SD_HANDLE(model, "model");
  model->clip_x0 = enabled != 0;
  return SD_OK;
}

SD_EXPORT sd_status sd_model_sample_files(sd_model model, const char* const* sar_paths,
                                          const char* const* out_paths, size_t count,
                                          uint64_t seed, sd_log_fn log, void* log_user) {
  SD_HANDLE(model, "model");
  return guarded([&] {
    if (count == 0) throw sardiff::EmptyDatasetError("no SAR tiles to sample");
    require(sar_paths, "sar_paths");
    require(out_paths, "out_paths");
    std::vector<std::filesystem::path> sar, out;
    for (size_t i = 0; i < count; ++i) {
      require(sar_paths[i], "sar_paths[i]");
      require(out_paths[i], "out_paths[i]");
      sar.emplace_back(sar_paths[i]);
      out.emplace_back(out_paths[i]);
    }
    sardiff::sample_files(model->model, sar, out, seed, wrap_log(log, log_user), 4,
                          model->clip_x0);
  });
}

SD_EXPORT sd_status sd_evaluate_dirs(const char* generated_dir, const char* truth_dir,
                                     const char* csv_path, const char* embedder,
                                     sd_metric_summary* summary) {
  return guarded([&] {
    require(generated_dir, "generated_dir");
    require(truth_dir, "truth_dir");
    require(summary, "summary");
    std::unique_ptr<sardiff::FeatureEmbedder> emb;
    if (embedder) emb = sardiff::make_embedder(embedder);
    const auto report = sardiff::evaluate_dirs(generated_dir, truth_dir, emb.get());
    if (csv_path) report.write_csv(csv_path);
    *summary = sd_metric_summary{};
    summary->pairs = report.count();
    summary->mean_psnr = report.mean_psnr;
    summary->mean_ssim = report.mean_ssim;
    summary->has_fid = report.fid ? 1 : 0;
    summary->fid = report.fid.value_or(0.0);
    std::strncpy(summary->embedder, report.embedder.c_str(), sizeof summary->embedder - 1);
  });
}

SD_EXPORT sd_status sd_format_summary(const sd_metric_summary* s, char* buffer, size_t cap) {
  return guarded([&] {
    require(s, "summary");
    sardiff::MetricReport r;
    r.rows.resize(s->pairs);
    r.mean_psnr = s->mean_psnr;
    r.mean_ssim = s->mean_ssim;
    if (s->has_fid) r.fid = s->fid;
    r.embedder = std::string(s->embedder, strnlen(s->embedder, sizeof s->embedder));
    copy_out(r.summary(), buffer, cap, "buffer");
  });
}

SD_EXPORT sd_status sd_make_fixture(const char* out_dir, int32_t pairs, int32_t tile_size,
                                    uint64_t seed) {
  return guarded([&] {
    require(out_dir, "out_dir");
    sardiff::write_fixture(out_dir, pairs, tile_size, seed);
  });
}

SD_EXPORT sd_status sd_scan_dataset(sd_config cfg, const char* manifest_path, size_t* pairs,
                                    size_t* orphans) {
  SD_HANDLE(cfg, "config");
  return guarded([&] {
    sardiff::ScanOptions opts;
    opts.fractions = cfg->cfg.data.fractions;
    opts.seed = cfg->cfg.training.seed;
    opts.allow_empty = true;
    const auto m = sardiff::scan_pairs(cfg->cfg.data.root, opts);
    if (manifest_path) m.write(manifest_path);
    if (pairs) *pairs = m.records.size();
    if (orphans) *orphans = m.orphans.size();
    if (m.records.empty())
      throw sardiff::EmptyDatasetError("no SAR/optical pairs found under " +
                                       cfg->cfg.data.root.string());
  });
}

}  // extern "C"
