// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sardiff {

/// Decoded PNG samples, interleaved (HWC), widened to 16 bits.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 (gray) or 3 (RGB); alpha is dropped on read
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;

  std::uint16_t max_value() const { return bit_depth == 16 ? 65535 : 255; }
};

/// Throws DecodeError on malformed data and IoError if the file cannot be read.
RawImage read_png(const std::filesystem::path& path);

/// Writes 8-bit or 16-bit gray/RGB. Output bytes depend only on the samples.
void write_png(const std::filesystem::path& path, const RawImage& image);

}  // namespace sardiff
