// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace sardiff {

namespace fs = std::filesystem;

void draw_step_noise(std::uint64_t seed, std::int64_t step, int T, std::vector<int>& t,
                     ImageTensor& eps) {
  Rng rng(derive_seed(seed, kStreamTrainStep, static_cast<std::uint64_t>(step)));
  for (auto& v : t) v = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
  rng.fill_normal(eps.span());
}

std::string format_log_row(const StepRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(r.step), r.lr,
                r.loss.simple, r.loss.color, r.loss.total);
  return buf;
}

fs::path checkpoint_path(const fs::path& run_dir, std::int64_t step) {
  char name[32];
  std::snprintf(name, sizeof name, "step_%06lld.ckpt", static_cast<long long>(step));
  return run_dir / "checkpoints" / name;
}

fs::path final_checkpoint_path(const fs::path& run_dir) { return run_dir / "final.ckpt"; }

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("error writing " + path.string());
}

// Keeps the header and rows up to `step`, so a resumed run appends after the
// checkpointed step exactly as an uninterrupted run would have.
void prepare_log(const fs::path& path, std::int64_t step) {
  std::string kept = std::string(kLogHeader) + "\n";
  std::ifstream in(path);
  if (in && step > 0) {
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stoll(line.substr(0, line.find(','))) > step) break;
      kept += line + "\n";
    }
  }
  in.close();
  write_text(path, kept);
}

void dump_nonfinite(const fs::path& run_dir, std::int64_t step, const Batch& batch,
                    const std::vector<int>& t, const LossBreakdown& loss) {
  std::ostringstream s;
  s << "step " << step << "\n";
  s << "simple " << loss.simple << " color " << loss.color << " total " << loss.total << "\n";
  for (std::size_t i = 0; i < batch.ids.size(); ++i) s << batch.ids[i] << " t=" << t[i] << "\n";
  char name[48];
  std::snprintf(name, sizeof name, "nonfinite_step_%06lld.txt", static_cast<long long>(step));
  write_text(run_dir / name, s.str());
}

Checkpoint make_checkpoint(const TrainConfig& cfg, const UNet<float>& net, const AdamState& adam,
                           const std::optional<ParameterSet<float>>& ema, double lr) {
  Checkpoint c;
  c.schedule = cfg.schedule;
  c.model = cfg.model;
  c.tile_size = cfg.data.tile_size;
  c.sar_stretch = cfg.data.sar_stretch;
  c.stretch_low = cfg.data.stretch_low;
  c.stretch_high = cfg.data.stretch_high;
  c.params = net.parameters();
  TrainSnapshot s;
  s.step = adam.step;
  s.seed = cfg.training.seed;
  s.lr = lr;
  s.adam = adam;
  s.ema = ema;
  c.state = std::move(s);
  return c;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  auto log = [&](const std::string& line) {
    if (options.log) options.log(line);
  };
  const auto schedule = cfg.schedule.build();
  const auto& run_dir = cfg.output.run_dir;
  std::error_code ec;
  fs::create_directories(run_dir / "checkpoints", ec);
  if (ec) throw IoError("cannot create run directory " + run_dir.string() + ": " + ec.message());
  write_text(run_dir / "config.json", to_json(cfg));

  ScanOptions scan;
  scan.fractions = cfg.data.fractions;
  scan.seed = cfg.training.seed;
  auto manifest = scan_pairs(cfg.data.root, scan);
  manifest.write(run_dir / "manifest.tsv");
  if (!manifest.orphans.empty())
    log("skipped " + std::to_string(manifest.orphans.size()) + " unpaired files");
  PairedDataset data(std::move(manifest), Split::kTrain, cfg.load_options(), cfg.data.cache);
  log("training pairs: " + std::to_string(data.size()));

  UNet<float> net(cfg.model, derive_seed(cfg.training.seed, kStreamInit));
  AdamState adam = AdamState::zeros_like(net.parameters());
  std::optional<ParameterSet<float>> ema;
  if (cfg.training.ema_decay > 0) ema = net.parameters();

  if (!options.resume_from.empty()) {
    Checkpoint ck = load_checkpoint(options.resume_from);
    require_same_schedule(ck.schedule, cfg.schedule);
    if (!(ck.model == cfg.model))
      throw FormatError(options.resume_from.string() + ": model config differs from the run config");
    if (!ck.state)
      throw FormatError(options.resume_from.string() + ": checkpoint has no training state");
    if (ck.state->seed != cfg.training.seed)
      throw ParameterError("training.seed: differs from the checkpoint's seed " +
                           std::to_string(ck.state->seed));
    net = UNet<float>(cfg.model, std::move(ck.params));
    adam = std::move(ck.state->adam);
    if (cfg.training.ema_decay > 0) ema = ck.state->ema ? std::move(*ck.state->ema) : net.parameters();
    log("resumed at step " + std::to_string(adam.step));
  }
  const fs::path log_path = run_dir / "log.csv";
  prepare_log(log_path, adam.step);
  std::ofstream log_csv(log_path, std::ios::app | std::ios::binary);
  if (!log_csv) throw IoError("cannot append to " + log_path.string());

  const std::int64_t end = options.stop_after > 0
                               ? std::min(options.stop_after, cfg.training.iterations)
                               : cfg.training.iterations;
  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.training.batch_size);
  const std::int64_t per_epoch = static_cast<std::int64_t>((n + bs - 1) / bs);
  const std::int64_t warmup = cfg.warmup_steps();
  const AdamWParams hp{cfg.optimizer.beta1, cfg.optimizer.beta2, cfg.optimizer.eps,
                       cfg.optimizer.weight_decay};

  TrainResult result;
  std::int64_t cached_epoch = -1;
  std::vector<std::vector<std::size_t>> epoch;
  auto grads = net.parameters().zeros_like();
  double lr = 0;
  const auto started = std::chrono::steady_clock::now();

  for (std::int64_t step = adam.step + 1; step <= end; ++step) {
    const std::int64_t e = (step - 1) / per_epoch;
    if (e != cached_epoch) {
      epoch = epoch_batches(n, bs, cfg.training.seed, static_cast<std::uint64_t>(e));
      cached_epoch = e;
    }
    const Batch batch = data.gather(epoch[static_cast<std::size_t>((step - 1) % per_epoch)]);
    std::vector<int> t(static_cast<std::size_t>(batch.x0.n()));
    ImageTensor eps(batch.x0.n(), batch.x0.c(), batch.x0.h(), batch.x0.w());
    draw_step_noise(cfg.training.seed, step, cfg.schedule.steps, t, eps);

    for (auto& g : grads.tensors()) g.fill(0.0f);
    const LossBreakdown loss = training_loss(net, batch.x0, batch.cond, t, eps, schedule, cfg.blur,
                                             cfg.color_weight, &grads);
    if (!std::isfinite(loss.total)) {
      dump_nonfinite(run_dir, step, batch, t, loss);
      std::string ids;
      for (const auto& id : batch.ids) ids += (ids.empty() ? "" : ", ") + id;
      throw NumericError("non-finite loss at step " + std::to_string(step) + " (batch: " + ids + ")");
    }
    if (cfg.optimizer.grad_clip_norm > 0) clip_global_norm(grads, cfg.optimizer.grad_clip_norm);
    lr = lr_at(step, cfg.optimizer.peak_lr, warmup);
    adamw_step(net.parameters(), grads, adam, lr, hp);
    if (ema) ema_update(*ema, net.parameters(), cfg.training.ema_decay);

    const StepRecord rec{step, lr, loss};
    result.history.push_back(rec);
    if (step % cfg.output.log_interval == 0) {
      log_csv << format_log_row(rec) << "\n";
      log_csv.flush();
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      char line[160];
      std::snprintf(line, sizeof line, "step %lld/%lld  loss %.5f (simple %.5f, color %.5f)  %.1fs",
                    static_cast<long long>(step), static_cast<long long>(cfg.training.iterations),
                    loss.total, loss.simple, loss.color, secs);
      log(line);
    }
    if (step % cfg.output.checkpoint_interval == 0 || step == end) {
      const auto path = checkpoint_path(run_dir, step);
      save_checkpoint(path, make_checkpoint(cfg, net, adam, ema, lr));
      result.checkpoint = path;
    }
  }

  if (end == cfg.training.iterations) {
    const auto path = final_checkpoint_path(run_dir);
    save_checkpoint(path, make_checkpoint(cfg, net, adam, ema, lr));
    result.checkpoint = path;
  } else if (result.checkpoint.empty()) {
    result.checkpoint = checkpoint_path(run_dir, adam.step);
  }
  return result;
}

}  // namespace sardiff
