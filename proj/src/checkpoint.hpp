// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "config.hpp"
#include "optimizer.hpp"
#include "unet.hpp"

namespace sardiff {

/*
 * Checkpoint layout, all integers and floats little-endian:
 *
 *   "SRDFCKPT"  u32 version  u32 flags (1 = train state, 2 = EMA)
 *   schedule    u32 T, f64 beta_start, f64 beta_end, u8 variance_mode, u8 terminal_noise
 *   model       u32 base, u32 n, n x u32 mults, u32 res_blocks, u32 time_dim,
 *               u32 groups, u32 sar_channels, u32 out_channels, u8 attention
 *   data        u32 tile_size, u8 sar_stretch, f64 stretch_low, f64 stretch_high
 *   params      u32 count, then per array: u16 name length, name, 4 x u32 dims, f32 values
 *   [state]     u64 step, u64 seed, f64 lr, params block (m), params block (v)
 *   [ema]       params block
 *   u64 FNV-1a of every preceding byte
 */
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainSnapshot {
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  double lr = 0;
  AdamState adam;
  std::optional<ParameterSet<float>> ema;
};

struct Checkpoint {
  ScheduleConfig schedule;
  UNetConfig model;
  int tile_size = 64;
  bool sar_stretch = false;
  double stretch_low = 2.0;
  double stretch_high = 98.0;
  ParameterSet<float> params;
  std::optional<TrainSnapshot> state;
};

/// Written to a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// FormatError on bad magic, version, checksum or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// ScheduleMismatchError unless T, both endpoints (bit-exact) and the
/// variance mode agree.
void require_same_schedule(const ScheduleConfig& trained, const ScheduleConfig& requested);

}  // namespace sardiff
