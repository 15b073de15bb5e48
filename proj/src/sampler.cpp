// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "sampler.hpp"

#include <algorithm>

#include "errors.hpp"
#include "rng.hpp"

namespace sardiff {

namespace {

UNet<float> build_net(const Checkpoint& c) {
  if (c.state && c.state->ema) return UNet<float>(c.model, *c.state->ema);
  return UNet<float>(c.model, c.params);
}

}  // namespace

TrainedModel::TrainedModel(Checkpoint ckpt)
    : ckpt_(std::move(ckpt)), net_(build_net(ckpt_)), schedule_(ckpt_.schedule.build()) {}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  return TrainedModel(load_checkpoint(path));
}

LoadOptions TrainedModel::load_options() const {
  LoadOptions o;
  o.sar_channels = ckpt_.model.sar_channels;
  o.tile_size = ckpt_.tile_size;
  o.sar_stretch = ckpt_.sar_stretch;
  o.stretch_low = ckpt_.stretch_low;
  o.stretch_high = ckpt_.stretch_high;
  return o;
}

ImageTensor TrainedModel::load_sar(const std::filesystem::path& path) const {
  PairRecord r;
  r.id = path.filename().string();
  r.sar = path;
  return load_sar_tile(r, load_options());
}

std::uint64_t tile_seed(std::uint64_t seed, const std::filesystem::path& sar_path) {
  return derive_seed(seed, kStreamSample, fnv1a(sar_path.filename().string()));
}

void sample_files(const TrainedModel& model, const std::vector<std::filesystem::path>& sar,
                  const std::vector<std::filesystem::path>& out, std::uint64_t seed,
                  const std::function<void(const std::string&)>& log, int batch,
                  bool clip_x0) {
  if (sar.size() != out.size()) throw ParameterError("sample: input and output counts differ");
  if (batch < 1) batch = 1;
  UNetPredictor predictor(model.net());
  for (std::size_t first = 0; first < sar.size(); first += static_cast<std::size_t>(batch)) {
    const std::size_t last = std::min(sar.size(), first + static_cast<std::size_t>(batch));
    std::vector<ImageTensor> conds;
    std::vector<std::uint64_t> seeds;
    bool uniform = true;
    for (std::size_t i = first; i < last; ++i) {
      conds.push_back(model.load_sar(sar[i]));
      seeds.push_back(tile_seed(seed, sar[i]));
      uniform = uniform && conds.back().same_shape(conds.front());
    }
    if (!uniform) {
      for (std::size_t i = first; i < last; ++i)
        sample_files(model, {sar[i]}, {out[i]}, seed, log, 1, clip_x0);
      continue;
    }
    const ImageTensor cond = stack<float>(conds);
    SampleOptions options;
    options.channels = model.checkpoint().model.out_channels;
    options.clip_x0 = clip_x0;
    const ImageTensor x0 = sample(predictor, cond, model.schedule(), seeds, options);
    for (std::size_t i = first; i < last; ++i) {
      const ImageTensor one = x0.slice(static_cast<int>(i - first), 1);
      write_png(out[i], quantize8(denormalize(one)));
      if (log) log("wrote " + out[i].string());
    }
  }
}

}  // namespace sardiff
