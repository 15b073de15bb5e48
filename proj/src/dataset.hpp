// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "png_io.hpp"
#include "tensor.hpp"

namespace sardiff {

namespace fs = std::filesystem;

enum class Split { kTrain, kVal, kTest };
const char* to_string(Split split);
Split split_from_string(const std::string& name);

struct SplitFractions {
  double train = 1.0;
  double val = 0.0;
  double test = 0.0;
  void validate() const;
};

struct PairRecord {
  std::string id;
  fs::path sar;
  fs::path optical;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  fs::path root;
  std::vector<PairRecord> records;  // sorted by id
  std::vector<fs::path> orphans;    // files without a counterpart
  std::uint64_t seed = 0;
  SplitFractions fractions;

  /// Record indices belonging to a split, in manifest order.
  std::vector<std::size_t> indices(Split split) const;
  /// Line-oriented cache: "id<TAB>sar<TAB>optical<TAB>split", paths relative to root.
  void write(const fs::path& path) const;
};

/// Split assignment depends only on (id, seed, fractions).
Split assign_split(const std::string& id, std::uint64_t seed, const SplitFractions& fractions);

struct ScanOptions {
  SplitFractions fractions;
  std::uint64_t seed = 0;
  /// When false an empty result raises EmptyDatasetError.
  bool allow_empty = false;
};

/// Pairs SAR tiles in `s1`/`s1_*` directories with optical tiles in the
/// sibling `s2`/`s2_*` directory; file names pair after replacing `_s1_` with
/// `_s2_`. The id is the SAR path relative to root, without extension.
DatasetManifest scan_pairs(const fs::path& root, const ScanOptions& options = {});

enum class SizePolicy { kCenterCrop, kReject };

struct LoadOptions {
  int sar_channels = 1;
  int tile_size = 64;
  SizePolicy size_policy = SizePolicy::kCenterCrop;
  /// Optional per-image percentile stretch of the SAR tile.
  bool sar_stretch = false;
  double stretch_low = 2.0;
  double stretch_high = 98.0;
};

struct PairedSample {
  ImageTensor sar;      // C_s x H x W in [-1, 1]
  ImageTensor optical;  // 3 x H x W in [-1, 1]
  std::string id;
};

/// v' = 2 v / max - 1, laid out CHW.
ImageTensor normalize(const RawImage& raw);
/// [-1, 1] -> [0, 1] via (v + 1) / 2, clamped.
ImageTensor denormalize(const ImageTensor& img);
/// Display-space [0, 1] image (n == 1) to 8-bit samples, rounding to nearest.
RawImage quantize8(const ImageTensor& display);

/// Center crop (or reject) to tile_size x tile_size.
RawImage fit_tile(const RawImage& raw, int tile_size, SizePolicy policy, const std::string& id);

PairedSample load_pair(const PairRecord& record, const LoadOptions& options);
/// The SAR half of load_pair (record.optical is not read).
ImageTensor load_sar_tile(const PairRecord& record, const LoadOptions& options);

struct Batch {
  ImageTensor x0;    // N x 3 x H x W
  ImageTensor cond;  // N x C_s x H x W
  std::vector<std::string> ids;
};

/// Shuffled index order for one epoch; a pure function of (count, seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::uint64_t epoch);

/// Samples of a split, optionally held in memory after first load.
class PairedDataset {
 public:
  PairedDataset(DatasetManifest manifest, Split split, LoadOptions options, bool cache = true);

  std::size_t size() const { return members_.size(); }
  const DatasetManifest& manifest() const { return manifest_; }
  const PairRecord& record(std::size_t i) const { return manifest_.records[members_[i]]; }
  /// i indexes the split, not the manifest.
  const PairedSample& get(std::size_t i);
  Batch gather(const std::vector<std::size_t>& split_indices);

 private:
  DatasetManifest manifest_;
  std::vector<std::size_t> members_;
  LoadOptions options_;
  bool cache_;
  std::vector<std::optional<PairedSample>> loaded_;
  std::optional<PairedSample> scratch_;
};

/// Deterministic batch stream over one epoch; the final short batch is kept.
class BatchStream {
 public:
  BatchStream(PairedDataset& data, std::size_t batch_size, std::uint64_t seed,
              std::uint64_t epoch);
  bool next(Batch& out);
  std::size_t batches() const;

 private:
  PairedDataset& data_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// Index lists of every batch in an epoch.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch);

}  // namespace sardiff
