// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "checkpoint.hpp"

namespace sardiff {

/// A trained predictor ready for sampling. Uses the EMA weights when the
/// checkpoint carries them.
class TrainedModel {
 public:
  explicit TrainedModel(Checkpoint ckpt);
  static TrainedModel load(const std::filesystem::path& path);

  const Checkpoint& checkpoint() const { return ckpt_; }
  const UNet<float>& net() const { return net_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  LoadOptions load_options() const;

  /// Reads and normalises one SAR tile as the model was trained on it.
  ImageTensor load_sar(const std::filesystem::path& path) const;

 private:
  Checkpoint ckpt_;
  UNet<float> net_;
  NoiseSchedule schedule_;
};

/// Per-tile sampling seed: depends on the run seed and the file name only.
std::uint64_t tile_seed(std::uint64_t seed, const std::filesystem::path& sar_path);

/// Samples every SAR tile and writes an 8-bit RGB PNG per tile. Tiles are
/// batched for speed; the result of each tile is independent of batching.
void sample_files(const TrainedModel& model, const std::vector<std::filesystem::path>& sar,
                  const std::vector<std::filesystem::path>& out, std::uint64_t seed,
                  const std::function<void(const std::string&)>& log = {}, int batch = 4,
                  bool clip_x0 = false);

}  // namespace sardiff
