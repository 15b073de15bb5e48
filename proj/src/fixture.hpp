// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "png_io.hpp"

namespace sardiff {

/// Land-cover classes used by the synthetic generator.
enum class Cover : std::uint8_t { kWater, kVegetation, kSoil, kUrban };

struct SyntheticPair {
  RawImage sar;      // 8-bit gray, speckled backscatter
  RawImage optical;  // 8-bit RGB
  std::vector<Cover> cover;
};

/// One procedurally generated co-registered pair. Both images are driven by
/// the same smooth land-cover map, so the optical colours are predictable from
/// the local SAR statistics.
SyntheticPair make_synthetic_pair(int tile, std::uint64_t seed, int index);

/// Writes `pairs` tiles as <root>/ROIs0000_synth/s1_0/ROIs0000_synth_s1_0_p<i>.png
/// and the matching s2_0 files. Returns the number of pairs written.
int write_fixture(const std::filesystem::path& root, int pairs, int tile, std::uint64_t seed);

}  // namespace sardiff
