// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "blur.hpp"
#include "dataset.hpp"
#include "diffusion.hpp"
#include "unet.hpp"

namespace sardiff {

inline constexpr int kConfigVersion = 1;

struct ScheduleConfig {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  VarianceMode variance_mode = VarianceMode::kBeta;
  bool terminal_noise = false;

  NoiseSchedule build() const;
};

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double peak_lr = 5e-5;
  /// Unset means 5% of the iteration count (at least 1).
  std::optional<std::int64_t> warmup_steps;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip_norm = 0.0;
};

struct TrainingConfig {
  std::int64_t iterations = 2000;
  int batch_size = 8;
  std::uint64_t seed = 0;
  /// 0 disables the parameter EMA.
  double ema_decay = 0.0;
};

struct DataConfig {
  std::filesystem::path root = "data";
  int tile_size = 64;
  SplitFractions fractions;
  SizePolicy size_policy = SizePolicy::kCenterCrop;
  bool sar_stretch = false;
  double stretch_low = 2.0;
  double stretch_high = 98.0;
  bool cache = true;
};

struct OutputConfig {
  std::filesystem::path run_dir = "runs/desk";
  std::int64_t log_interval = 1;
  std::int64_t checkpoint_interval = 500;
};

struct TrainConfig {
  ScheduleConfig schedule;
  UNetConfig model;
  BlurSpec blur;
  double color_weight = 1.0;
  OptimizerConfig optimizer;
  TrainingConfig training;
  DataConfig data;
  OutputConfig output;

  std::int64_t warmup_steps() const;
  LoadOptions load_options() const;
  /// Throws ParameterError naming the first invalid field.
  void validate() const;
};

/// Relative data.root and output.run_dir resolve against the config file's
/// directory. Unknown keys and version mismatches raise ParameterError.
TrainConfig load_config(const std::filesystem::path& path);
TrainConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);

/// Every field, defaults applied, warmup made explicit.
std::string to_json(const TrainConfig& cfg);

}  // namespace sardiff
