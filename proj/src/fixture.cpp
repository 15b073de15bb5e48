// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "errors.hpp"
#include "rng.hpp"

namespace sardiff {

namespace {

// Value noise: random lattice values, smoothstep-interpolated.
std::vector<double> smooth_field(Rng& rng, int tile, int cells) {
  const int g = cells + 1;
  std::vector<double> lattice(static_cast<std::size_t>(g) * g);
  for (auto& v : lattice) v = 2.0 * rng.uniform() - 1.0;
  std::vector<double> out(static_cast<std::size_t>(tile) * tile);
  const double step = static_cast<double>(cells) / tile;
  for (int y = 0; y < tile; ++y) {
    const double fy = (y + 0.5) * step;
    const int y0 = std::min(static_cast<int>(fy), cells - 1);
    double ty = fy - y0;
    ty = ty * ty * (3 - 2 * ty);
    for (int x = 0; x < tile; ++x) {
      const double fx = (x + 0.5) * step;
      const int x0 = std::min(static_cast<int>(fx), cells - 1);
      double tx = fx - x0;
      tx = tx * tx * (3 - 2 * tx);
      auto at = [&](int j, int i) { return lattice[static_cast<std::size_t>(j) * g + i]; };
      const double top = at(y0, x0) * (1 - tx) + at(y0, x0 + 1) * tx;
      const double bot = at(y0 + 1, x0) * (1 - tx) + at(y0 + 1, x0 + 1) * tx;
      out[static_cast<std::size_t>(y) * tile + x] = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

struct CoverStyle {
  std::array<double, 3> rgb;  // display space
  double backscatter;         // mean SAR intensity in [0, 1]
};

constexpr std::array<CoverStyle, 4> kStyles{{
    {{0.10, 0.22, 0.40}, 0.08},  // water
    {{0.18, 0.45, 0.16}, 0.42},  // vegetation
    {{0.62, 0.50, 0.34}, 0.26},  // soil
    {{0.60, 0.60, 0.62}, 0.78},  // urban
}};

std::uint16_t to8(double v) { return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

SyntheticPair make_synthetic_pair(int tile, std::uint64_t seed, int index) {
  if (tile < 8) throw ParameterError("fixture tile size must be >= 8");
  Rng rng(derive_seed(seed, kStreamFixture, static_cast<std::uint64_t>(index)));
  const int cells = std::max(2, tile / 16);
  const auto wet = smooth_field(rng, tile, cells);
  const auto green = smooth_field(rng, tile, cells);
  const auto detail = smooth_field(rng, tile, cells * 4);
  // Per-tile thresholds vary the class mix between tiles.
  const double water_level = -0.55 + 0.4 * rng.uniform();
  const double urban_level = -0.45 + 0.3 * rng.uniform();

  SyntheticPair p;
  const std::size_t n = static_cast<std::size_t>(tile) * tile;
  p.cover.resize(n);
  p.sar = RawImage{tile, tile, 1, 8, std::vector<std::uint16_t>(n)};
  p.optical = RawImage{tile, tile, 3, 8, std::vector<std::uint16_t>(n * 3)};
  for (std::size_t i = 0; i < n; ++i) {
    Cover c;
    if (wet[i] < water_level) c = Cover::kWater;
    else if (green[i] > 0.05) c = Cover::kVegetation;
    else if (green[i] < urban_level) c = Cover::kUrban;
    else c = Cover::kSoil;
    p.cover[i] = c;
    const CoverStyle& s = kStyles[static_cast<int>(c)];
    const double shade = 1.0 + 0.15 * detail[i];
    for (int ch = 0; ch < 3; ++ch) p.optical.samples[i * 3 + ch] = to8(s.rgb[ch] * shade);
    // Four-look speckle: mean of four unit exponentials.
    double speckle = 0;
    for (int k = 0; k < 4; ++k) speckle -= std::log(1.0 - rng.uniform());
    speckle /= 4.0;
    p.sar.samples[i] = to8(s.backscatter * shade * speckle);
  }
  return p;
}

int write_fixture(const std::filesystem::path& root, int pairs, int tile, std::uint64_t seed) {
  if (pairs < 1) throw ParameterError("fixture pair count must be >= 1");
  const auto scene = root / "ROIs0000_synth";
  std::error_code ec;
  std::filesystem::create_directories(scene / "s1_0", ec);
  std::filesystem::create_directories(scene / "s2_0", ec);
  if (ec) throw IoError("cannot create " + scene.string() + ": " + ec.message());
  for (int i = 0; i < pairs; ++i) {
    const auto p = make_synthetic_pair(tile, seed, i);
    const std::string tag = "_p" + std::to_string(i) + ".png";
    write_png(scene / "s1_0" / ("ROIs0000_synth_s1_0" + tag), p.sar);
    write_png(scene / "s2_0" / ("ROIs0000_synth_s2_0" + tag), p.optical);
  }
  return pairs;
}

}  // namespace sardiff
