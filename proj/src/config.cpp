// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "errors.hpp"

namespace sardiff {

using nlohmann::json;

NoiseSchedule ScheduleConfig::build() const {
  return make_linear_schedule(steps, beta_start, beta_end, variance_mode, terminal_noise);
}

std::int64_t TrainConfig::warmup_steps() const {
  if (optimizer.warmup_steps) return *optimizer.warmup_steps;
  return std::max<std::int64_t>(1, training.iterations / 20);
}

LoadOptions TrainConfig::load_options() const {
  LoadOptions o;
  o.sar_channels = model.sar_channels;
  o.tile_size = data.tile_size;
  o.size_policy = data.size_policy;
  o.sar_stretch = data.sar_stretch;
  o.stretch_low = data.stretch_low;
  o.stretch_high = data.stretch_high;
  return o;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ParameterError(what); };
  // Schedule bounds are checked by make_linear_schedule.
  (void)schedule.build();
  model.validate();
  sardiff::validate(blur);
  if (!(color_weight >= 0)) fail("loss.color_weight: must be >= 0");
  if (!(optimizer.beta1 >= 0 && optimizer.beta1 < 1)) fail("optimizer.beta1: must be in [0, 1)");
  if (!(optimizer.beta2 >= 0 && optimizer.beta2 < 1)) fail("optimizer.beta2: must be in [0, 1)");
  if (!(optimizer.eps > 0)) fail("optimizer.eps: must be > 0");
  if (!(optimizer.weight_decay >= 0)) fail("optimizer.weight_decay: must be >= 0");
  if (!(optimizer.peak_lr > 0)) fail("optimizer.peak_lr: must be > 0");
  if (optimizer.warmup_steps && *optimizer.warmup_steps < 1)
    fail("optimizer.warmup_steps: must be >= 1");
  if (!(optimizer.grad_clip_norm >= 0)) fail("optimizer.grad_clip_norm: must be >= 0");
  if (training.iterations < 1) fail("training.iterations: must be >= 1");
  if (training.batch_size < 1) fail("training.batch_size: must be >= 1");
  if (!(training.ema_decay >= 0 && training.ema_decay < 1))
    fail("training.ema_decay: must be in [0, 1)");
  if (data.tile_size < 1 || data.tile_size % model.spatial_multiple() != 0)
    fail("data.tile_size: must be a positive multiple of " +
         std::to_string(model.spatial_multiple()));
  data.fractions.validate();
  if (!(data.stretch_low >= 0 && data.stretch_low < data.stretch_high && data.stretch_high <= 100))
    fail("data.stretch: need 0 <= low < high <= 100");
  if (output.log_interval < 1) fail("output.log_interval: must be >= 1");
  if (output.checkpoint_interval < 1) fail("output.checkpoint_interval: must be >= 1");
}

namespace {

// Reads one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParameterError(where() + "must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ParameterError(path_ + "." + key + ": wrong type");
    }
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ParameterError("unknown config key \"" + where() + it.key() + "\"");
  }

 private:
  std::string where() const { return path_.empty() ? "" : path_ + "."; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.is_absolute() || base.empty()) return p.lexically_normal();
  return (base / p).lexically_normal();
}

}  // namespace

TrainConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParameterError(std::string("config is not valid JSON: ") + e.what());
  }
  TrainConfig cfg;
  Section top(root, "");
  int version = 0;
  top.get("version", version);
  if (version != kConfigVersion)
    throw ParameterError("version: expected " + std::to_string(kConfigVersion) + ", got " +
                         std::to_string(version));

  if (auto s = top.child("schedule")) {
    std::string mode = to_string(cfg.schedule.variance_mode);
    s->get("T", cfg.schedule.steps);
    s->get("beta_start", cfg.schedule.beta_start);
    s->get("beta_end", cfg.schedule.beta_end);
    s->get("variance_mode", mode);
    s->get("terminal_noise", cfg.schedule.terminal_noise);
    s->finish();
    cfg.schedule.variance_mode = variance_mode_from_string(mode);
  }
  if (auto s = top.child("model")) {
    s->get("base_channels", cfg.model.base_channels);
    s->get("channel_mults", cfg.model.channel_mults);
    s->get("num_res_blocks", cfg.model.num_res_blocks);
    s->get("time_dim", cfg.model.time_dim);
    s->get("norm_groups", cfg.model.norm_groups);
    s->get("sar_channels", cfg.model.sar_channels);
    s->get("attention", cfg.model.attention);
    s->finish();
  }
  if (auto s = top.child("loss")) {
    s->get("color_weight", cfg.color_weight);
    if (auto b = s->child("blur")) {
      b->get("kernel_size", cfg.blur.kernel_size);
      b->get("sigma", cfg.blur.sigma);
      b->finish();
    }
    s->finish();
  }
  if (auto s = top.child("optimizer")) {
    std::int64_t warmup = 0;
    s->get("beta1", cfg.optimizer.beta1);
    s->get("beta2", cfg.optimizer.beta2);
    s->get("eps", cfg.optimizer.eps);
    s->get("weight_decay", cfg.optimizer.weight_decay);
    s->get("peak_lr", cfg.optimizer.peak_lr);
    s->get("warmup_steps", warmup);
    s->get("grad_clip_norm", cfg.optimizer.grad_clip_norm);
    s->finish();
    if (warmup != 0) cfg.optimizer.warmup_steps = warmup;
  }
  if (auto s = top.child("training")) {
    s->get("iterations", cfg.training.iterations);
    s->get("batch_size", cfg.training.batch_size);
    s->get("seed", cfg.training.seed);
    s->get("ema_decay", cfg.training.ema_decay);
    s->finish();
  }
  if (auto s = top.child("data")) {
    std::string root_dir = cfg.data.root.string();
    std::string policy = "center_crop";
    s->get("root", root_dir);
    s->get("tile_size", cfg.data.tile_size);
    s->get("size_policy", policy);
    s->get("sar_stretch", cfg.data.sar_stretch);
    s->get("stretch_low", cfg.data.stretch_low);
    s->get("stretch_high", cfg.data.stretch_high);
    s->get("cache", cfg.data.cache);
    if (auto f = s->child("split")) {
      f->get("train", cfg.data.fractions.train);
      f->get("val", cfg.data.fractions.val);
      f->get("test", cfg.data.fractions.test);
      f->finish();
    }
    s->finish();
    cfg.data.root = root_dir;
    if (policy == "center_crop") cfg.data.size_policy = SizePolicy::kCenterCrop;
    else if (policy == "reject") cfg.data.size_policy = SizePolicy::kReject;
    else throw ParameterError("data.size_policy: expected center_crop or reject, got \"" + policy + "\"");
  }
  if (auto s = top.child("output")) {
    std::string run_dir = cfg.output.run_dir.string();
    s->get("run_dir", run_dir);
    s->get("log_interval", cfg.output.log_interval);
    s->get("checkpoint_interval", cfg.output.checkpoint_interval);
    s->finish();
    cfg.output.run_dir = run_dir;
  }
  top.finish();

  cfg.data.root = resolve(base_dir, cfg.data.root);
  cfg.output.run_dir = resolve(base_dir, cfg.output.run_dir);
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::absolute(path).parent_path());
}

std::string to_json(const TrainConfig& c) {
  json j;
  j["version"] = kConfigVersion;
  j["schedule"] = {{"T", c.schedule.steps},
                   {"beta_start", c.schedule.beta_start},
                   {"beta_end", c.schedule.beta_end},
                   {"variance_mode", to_string(c.schedule.variance_mode)},
                   {"terminal_noise", c.schedule.terminal_noise}};
  j["model"] = {{"base_channels", c.model.base_channels},
                {"channel_mults", c.model.channel_mults},
                {"num_res_blocks", c.model.num_res_blocks},
                {"time_dim", c.model.time_dim},
                {"norm_groups", c.model.norm_groups},
                {"sar_channels", c.model.sar_channels},
                {"attention", c.model.attention}};
  j["loss"] = {{"color_weight", c.color_weight},
               {"blur", {{"kernel_size", c.blur.kernel_size}, {"sigma", c.blur.sigma}}}};
  j["optimizer"] = {{"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.eps},
                    {"weight_decay", c.optimizer.weight_decay},
                    {"peak_lr", c.optimizer.peak_lr},
                    {"warmup_steps", c.warmup_steps()},
                    {"grad_clip_norm", c.optimizer.grad_clip_norm}};
  j["training"] = {{"iterations", c.training.iterations},
                   {"batch_size", c.training.batch_size},
                   {"seed", c.training.seed},
                   {"ema_decay", c.training.ema_decay}};
  j["data"] = {{"root", c.data.root.generic_string()},
               {"tile_size", c.data.tile_size},
               {"size_policy", c.data.size_policy == SizePolicy::kReject ? "reject" : "center_crop"},
               {"sar_stretch", c.data.sar_stretch},
               {"stretch_low", c.data.stretch_low},
               {"stretch_high", c.data.stretch_high},
               {"cache", c.data.cache},
               {"split",
                {{"train", c.data.fractions.train},
                 {"val", c.data.fractions.val},
                 {"test", c.data.fractions.test}}}};
  j["output"] = {{"run_dir", c.output.run_dir.generic_string()},
                 {"log_interval", c.output.log_interval},
                 {"checkpoint_interval", c.output.checkpoint_interval}};
  return j.dump(2) + "\n";
}

}  // namespace sardiff
