// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "errors.hpp"
#include "rng.hpp"

namespace sardiff {

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ParameterError("unknown split \"" + name + "\" (expected train, val or test)");
}

void SplitFractions::validate() const {
  if (train < 0 || val < 0 || test < 0) throw ParameterError("split fractions must be >= 0");
  if (std::abs(train + val + test - 1.0) > 1e-9)
    throw ParameterError("split fractions must sum to 1");
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].split == split) out.push_back(i);
  return out;
}

void DatasetManifest::write(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& r : records) {
    out << r.id << '\t' << fs::relative(r.sar, root).generic_string() << '\t'
        << fs::relative(r.optical, root).generic_string() << '\t' << to_string(r.split) << '\n';
  }
  if (!out) throw IoError("error writing manifest " + path.string());
}

Split assign_split(const std::string& id, std::uint64_t seed, const SplitFractions& fractions) {
  const std::uint64_t h = derive_seed(seed, kStreamSplit, fnv1a(id));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  if (u < fractions.train) return Split::kTrain;
  if (u < fractions.train + fractions.val) return Split::kVal;
  return Split::kTest;
}

namespace {

// "s1" or "s1_<suffix>" -> "s2..." ; empty if the name is not a SAR directory.
std::string counterpart_dir(const std::string& name, const std::string& from,
                            const std::string& to) {
  if (name == from) return to;
  if (name.rfind(from + "_", 0) == 0) return to + name.substr(from.size());
  return {};
}

std::string counterpart_file(std::string name, const std::string& from, const std::string& to) {
  const auto pos = name.find("_" + from + "_");
  if (pos != std::string::npos) name.replace(pos + 1, from.size(), to);
  return name;
}

bool is_png(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

}  // namespace

DatasetManifest scan_pairs(const fs::path& root, const ScanOptions& options) {
  options.fractions.validate();
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("dataset root is not a directory: " + root.string());

  std::vector<fs::path> sar_files;
  std::set<fs::path> optical_files;
  fs::recursive_directory_iterator it(root, ec), end;
  if (ec) throw IoError("cannot read directory " + root.string() + ": " + ec.message());
  for (; it != end; it.increment(ec)) {
    if (ec) throw IoError("cannot read directory under " + root.string() + ": " + ec.message());
    if (!it->is_regular_file() || !is_png(it->path())) continue;
    const std::string dir = it->path().parent_path().filename().string();
    if (!counterpart_dir(dir, "s1", "s2").empty()) sar_files.push_back(it->path());
    else if (!counterpart_dir(dir, "s2", "s1").empty()) optical_files.insert(it->path());
  }

  DatasetManifest m;
  m.root = root;
  m.seed = options.seed;
  m.fractions = options.fractions;
  std::set<fs::path> matched;
  for (const auto& sar : sar_files) {
    const fs::path parent = sar.parent_path();
    const fs::path optical = parent.parent_path() /
                             counterpart_dir(parent.filename().string(), "s1", "s2") /
                             counterpart_file(sar.filename().string(), "s1", "s2");
    if (!optical_files.count(optical)) {
      m.orphans.push_back(sar);
      continue;
    }
    matched.insert(optical);
    PairRecord r;
    r.id = fs::relative(sar, root).replace_extension().generic_string();
    r.sar = sar;
    r.optical = optical;
    r.split = assign_split(r.id, options.seed, options.fractions);
    m.records.push_back(std::move(r));
  }
  for (const auto& opt : optical_files)
    if (!matched.count(opt)) m.orphans.push_back(opt);
  std::sort(m.records.begin(), m.records.end(),
            [](const PairRecord& a, const PairRecord& b) { return a.id < b.id; });
  std::sort(m.orphans.begin(), m.orphans.end());

  if (m.records.empty() && !options.allow_empty) {
    throw EmptyDatasetError("no SAR/optical pairs found under " + root.string() + " (" +
                            std::to_string(m.orphans.size()) + " orphan files)");
  }
  return m;
}

ImageTensor normalize(const RawImage& raw) {
  ImageTensor out = ImageTensor::image(raw.channels, raw.height, raw.width);
  const double max = raw.max_value();
  for (int c = 0; c < raw.channels; ++c)
    for (int y = 0; y < raw.height; ++y)
      for (int x = 0; x < raw.width; ++x) {
        const double v = raw.samples[(static_cast<std::size_t>(y) * raw.width + x) * raw.channels + c];
        out.at(0, c, y, x) = static_cast<float>(2.0 * v / max - 1.0);
      }
  return out;
}

ImageTensor denormalize(const ImageTensor& img) {
  ImageTensor out = img;
  for (auto& v : out.storage()) v = std::clamp((v + 1.0f) * 0.5f, 0.0f, 1.0f);
  return out;
}

RawImage quantize8(const ImageTensor& display) {
  if (display.n() != 1) throw ShapeError("quantize8: expected a single image");
  RawImage raw;
  raw.width = display.w();
  raw.height = display.h();
  raw.channels = display.c();
  raw.bit_depth = 8;
  raw.samples.resize(display.size());
  for (int c = 0; c < raw.channels; ++c)
    for (int y = 0; y < raw.height; ++y)
      for (int x = 0; x < raw.width; ++x) {
        const float v = std::clamp(display.at(0, c, y, x), 0.0f, 1.0f);
        raw.samples[(static_cast<std::size_t>(y) * raw.width + x) * raw.channels + c] =
            static_cast<std::uint16_t>(std::lround(v * 255.0f));
      }
  return raw;
}

RawImage fit_tile(const RawImage& raw, int tile, SizePolicy policy, const std::string& id) {
  if (raw.width == tile && raw.height == tile) return raw;
  if (policy == SizePolicy::kReject || raw.width < tile || raw.height < tile) {
    throw ShapeError(id + ": image is " + std::to_string(raw.width) + "x" +
                     std::to_string(raw.height) + ", expected " + std::to_string(tile) + "x" +
                     std::to_string(tile));
  }
  RawImage out = raw;
  out.width = tile;
  out.height = tile;
  out.samples.assign(static_cast<std::size_t>(tile) * tile * raw.channels, 0);
  const int x0 = (raw.width - tile) / 2, y0 = (raw.height - tile) / 2;
  for (int y = 0; y < tile; ++y) {
    const auto* src = raw.samples.data() +
                      (static_cast<std::size_t>(y + y0) * raw.width + x0) * raw.channels;
    std::copy_n(src, static_cast<std::size_t>(tile) * raw.channels,
                out.samples.data() + static_cast<std::size_t>(y) * tile * raw.channels);
  }
  return out;
}

namespace {

void stretch(ImageTensor& img, double low_pct, double high_pct) {
  std::vector<float> sorted(img.storage());
  std::sort(sorted.begin(), sorted.end());
  auto pick = [&](double pct) {
    const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * (sorted.size() - 1);
    return sorted[static_cast<std::size_t>(std::lround(pos))];
  };
  const float lo = pick(low_pct), hi = pick(high_pct);
  if (!(hi > lo)) return;
  for (auto& v : img.storage()) v = std::clamp((v - lo) / (hi - lo), 0.0f, 1.0f) * 2.0f - 1.0f;
}

RawImage read_tile(const fs::path& path, const std::string& id) {
  try {
    return read_png(path);
  } catch (const DecodeError& e) {
    throw DecodeError(id + ": " + e.what());
  }
}

}  // namespace

ImageTensor load_sar_tile(const PairRecord& record, const LoadOptions& options) {
  RawImage sar = read_tile(record.sar, record.id);
  if (sar.channels != options.sar_channels) {
    throw ShapeError(record.id + ": SAR tile has " + std::to_string(sar.channels) +
                     " channels, expected " + std::to_string(options.sar_channels));
  }
  ImageTensor out = normalize(fit_tile(sar, options.tile_size, options.size_policy, record.id));
  if (options.sar_stretch) stretch(out, options.stretch_low, options.stretch_high);
  return out;
}

PairedSample load_pair(const PairRecord& record, const LoadOptions& options) {
  RawImage optical = read_tile(record.optical, record.id);
  if (optical.channels != 3) {
    throw ShapeError(record.id + ": optical tile has " + std::to_string(optical.channels) +
                     " channels, expected 3");
  }
  optical = fit_tile(optical, options.tile_size, options.size_policy, record.id);
  return PairedSample{load_sar_tile(record, options), normalize(optical), record.id};
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(derive_seed(seed, kStreamShuffle, epoch));
  rng.shuffle(order);
  return order;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  const auto order = epoch_order(count, seed, epoch);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < count; i += batch_size)
    out.emplace_back(order.begin() + i, order.begin() + std::min(count, i + batch_size));
  return out;
}

PairedDataset::PairedDataset(DatasetManifest manifest, Split split, LoadOptions options,
                             bool cache)
    : manifest_(std::move(manifest)),
      members_(manifest_.indices(split)),
      options_(options),
      cache_(cache),
      loaded_(members_.size()) {
  if (members_.empty())
    throw EmptyDatasetError(std::string("split \"") + to_string(split) + "\" is empty");
}

const PairedSample& PairedDataset::get(std::size_t i) {
  if (i >= members_.size()) throw IndexError("dataset index out of range");
  if (cache_) {
    if (!loaded_[i]) loaded_[i] = load_pair(manifest_.records[members_[i]], options_);
    return *loaded_[i];
  }
  scratch_ = load_pair(manifest_.records[members_[i]], options_);
  return *scratch_;
}

Batch PairedDataset::gather(const std::vector<std::size_t>& split_indices) {
  std::vector<ImageTensor> x0, cond;
  Batch b;
  for (auto i : split_indices) {
    const PairedSample& s = get(i);
    x0.push_back(s.optical);
    cond.push_back(s.sar);
    b.ids.push_back(s.id);
  }
  b.x0 = stack<float>(x0);
  b.cond = stack<float>(cond);
  return b;
}

BatchStream::BatchStream(PairedDataset& data, std::size_t batch_size, std::uint64_t seed,
                         std::uint64_t epoch)
    : data_(data), batch_size_(batch_size), order_(epoch_order(data.size(), seed, epoch)) {
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
}

std::size_t BatchStream::batches() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

bool BatchStream::next(Batch& out) {
  if (pos_ >= order_.size()) return false;
  const std::size_t end = std::min(order_.size(), pos_ + batch_size_);
  out = data_.gather(std::vector<std::size_t>(order_.begin() + pos_, order_.begin() + end));
  pos_ = end;
  return true;
}

}  // namespace sardiff
