// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "config.hpp"
#include "objectives.hpp"

namespace sardiff {

struct TrainOptions {
  std::filesystem::path resume_from;  // empty for a fresh run
  /// Stop after this step (0 = configured iterations); a checkpoint is written there.
  std::int64_t stop_after = 0;
  std::function<void(const std::string&)> log;
};

struct StepRecord {
  std::int64_t step = 0;
  double lr = 0;
  LossBreakdown loss;
};

struct TrainResult {
  std::filesystem::path checkpoint;
  std::vector<StepRecord> history;  // every step run by this call
};

/// Timesteps (uniform on 1..T) and noise for one step; a pure function of
/// (seed, step), which is what makes resume exact.
void draw_step_noise(std::uint64_t seed, std::int64_t step, int T, std::vector<int>& t,
                     ImageTensor& eps);

/// One log row: "step,lr,simple,color,total".
std::string format_log_row(const StepRecord& r);
inline constexpr const char* kLogHeader = "step,lr,simple,color,total";

/// Paths inside a run directory.
std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, std::int64_t step);
std::filesystem::path final_checkpoint_path(const std::filesystem::path& run_dir);

/// Writes run_dir/config.json (resolved), run_dir/log.csv,
/// run_dir/checkpoints/step_NNNNNN.ckpt and run_dir/final.ckpt.
TrainResult train(const TrainConfig& config, const TrainOptions& options = {});

}  // namespace sardiff
