// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the toolkit only through the C API.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "sardiff/sardiff.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Failure {
  sd_status status;
};

void check(sd_status s) {
  if (s != SD_OK) throw Failure{s};
}

void print_line(void*, const char* line) { std::fprintf(stderr, "%s\n", line); }

struct Config {
  sd_config h = nullptr;
  explicit Config(const std::string& path) { check(sd_config_load(path.c_str(), &h)); }
  ~Config() { sd_config_destroy(h); }
};

struct Model {
  sd_model h = nullptr;
  explicit Model(const std::string& path) { check(sd_model_load(path.c_str(), &h)); }
  ~Model() { sd_model_destroy(h); }
};

std::vector<fs::path> sar_inputs(const fs::path& p) {
  std::vector<fs::path> out;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    std::sort(out.begin(), out.end());
  } else {
    out.push_back(p);
  }
  return out;
}

// Output files take the optical tile name so they pair with the truth directory.
std::string optical_name(const fs::path& sar) {
  std::string name = sar.filename().string();
  const auto pos = name.rfind("_s1_");
  if (pos != std::string::npos) name.replace(pos, 4, "_s2_");
  return name;
}

int run_train(const std::string& config, const std::string& resume, std::int64_t stop_after,
              bool quiet) {
  Config cfg(config);
  sd_train_options opts{};
  opts.resume_from = resume.empty() ? nullptr : resume.c_str();
  opts.stop_after = stop_after;
  opts.log = quiet ? nullptr : print_line;
  char path[4096];
  check(sd_train(cfg.h, &opts, path, sizeof path));
  std::printf("%s\n", path);
  return kExitOk;
}

int run_sample(const std::string& checkpoint, const std::string& sar, const std::string& out,
               std::uint64_t seed, const std::string& config, bool clip_x0, bool quiet) {
  Model model(checkpoint);
  check(sd_model_set_clip_x0(model.h, clip_x0 ? 1 : 0));
  if (!config.empty()) {
    Config cfg(config);
    check(sd_model_check_schedule(model.h, cfg.h));
  }
  const auto inputs = sar_inputs(sar);
  if (inputs.empty()) {
    std::fprintf(stderr, "error: no .png files in %s\n", sar.c_str());
    return kExitRuntime;
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    std::fprintf(stderr, "error: cannot create %s: %s\n", out.c_str(), ec.message().c_str());
    return kExitRuntime;
  }
  std::vector<std::string> in_s, out_s;
  for (const auto& p : inputs) {
    in_s.push_back(p.string());
    out_s.push_back((fs::path(out) / optical_name(p)).string());
  }
  std::vector<const char*> in_c, out_c;
  for (std::size_t i = 0; i < in_s.size(); ++i) {
    in_c.push_back(in_s[i].c_str());
    out_c.push_back(out_s[i].c_str());
  }
  check(sd_model_sample_files(model.h, in_c.data(), out_c.data(), in_c.size(), seed,
                              quiet ? nullptr : print_line, nullptr));
  return kExitOk;
}

int run_evaluate(const std::string& generated, const std::string& truth, const std::string& fid,
                 const std::string& csv) {
  sd_metric_summary summary{};
  check(sd_evaluate_dirs(generated.c_str(), truth.c_str(), csv.empty() ? nullptr : csv.c_str(),
                         fid.empty() ? nullptr : fid.c_str(), &summary));
  char line[512];
  check(sd_format_summary(&summary, line, sizeof line));
  std::printf("%s\n", line);
  return kExitOk;
}

int run_inspect(const std::string& config) {
  Config cfg(config);
  sd_schedule sched = nullptr;
  check(sd_schedule_from_config(cfg.h, &sched));
  std::int32_t steps = 0;
  sd_schedule_length(sched, &steps);
  std::printf("t,beta,alpha_bar,sigma\n");
  for (std::int32_t t = 1; t <= steps; ++t) {
    double beta = 0, abar = 0, sigma = 0;
    sd_schedule_at(sched, t, &beta, &abar, &sigma);
    std::printf("%d,%.17g,%.17g,%.17g\n", t, beta, abar, sigma);
  }
  sd_schedule_destroy(sched);
  return kExitOk;
}

int run_scan(const std::string& config, const std::string& manifest) {
  Config cfg(config);
  std::size_t pairs = 0, orphans = 0;
  check(sd_scan_dataset(cfg.h, manifest.empty() ? nullptr : manifest.c_str(), &pairs, &orphans));
  std::printf("pairs=%zu orphans=%zu\n", pairs, orphans);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAR-to-optical translation with a colour-supervised conditional diffusion model",
               "sardiff"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sd_version());

  std::string config, checkpoint, resume, sar, out, generated, truth, fid, csv, manifest;
  std::int64_t stop_after = 0;
  std::uint64_t seed = 0;
  int pairs = 32, tile = 64;
  bool quiet = false;
  bool clip_x0 = false;
  // Checked after parsing; see below.
  std::vector<std::pair<CLI::App*, CLI::Option*>> required;
  auto req = [&](CLI::App* sub, CLI::Option* o) {
    required.emplace_back(sub, o);
    return o;
  };

  auto* train = app.add_subcommand("train", "Train a model from a JSON run config");
  req(train, train->add_option("config", config, "Run configuration (JSON)"))->check(CLI::ExistingFile);
  train->add_option("--resume", resume, "Continue from a checkpoint written by an earlier run")
      ->check(CLI::ExistingFile);
  train->add_option("--stop-after", stop_after, "Stop (and checkpoint) after this step")
      ->check(CLI::NonNegativeNumber);
  train->add_flag("-q,--quiet", quiet, "No progress output");

  auto* sample = app.add_subcommand("sample", "Generate optical tiles from SAR tiles");
  req(sample, sample->add_option("checkpoint", checkpoint, "Trained checkpoint"))->check(CLI::ExistingFile);
  req(sample, sample->add_option("--sar", sar, "SAR PNG file or directory of PNGs"))->check(CLI::ExistingPath);
  req(sample, sample->add_option("--out", out, "Output directory"));
  req(sample, sample->add_option("--seed", seed, "Sampling seed"));
  sample->add_option("--config", config, "Refuse to sample if this config's schedule differs")
      ->check(CLI::ExistingFile);
  sample->add_flag("--clip-x0", clip_x0, "Clamp the predicted x0 to [-1, 1] at every step");
  sample->add_flag("-q,--quiet", quiet, "No progress output");

  auto* evaluate = app.add_subcommand("evaluate", "PSNR, SSIM and optional FID between two directories");
  req(evaluate, evaluate->add_option("--generated", generated, "Directory of generated PNGs"));
  req(evaluate, evaluate->add_option("--truth", truth, "Directory of ground-truth PNGs"));
  evaluate->add_option("--fid", fid, "Also report FID with this embedder (default: moments-randproj64)")
      ->expected(0, 1)
      ->default_str("default");
  evaluate->add_option("--out", csv, "Write per-pair rows to this CSV file");

  auto* inspect = app.add_subcommand("inspect-schedule", "Print t,beta,alpha_bar,sigma as CSV");
  req(inspect, inspect->add_option("config", config, "Run configuration (JSON)"))->check(CLI::ExistingFile);

  auto* fixture = app.add_subcommand("make-fixture", "Write a synthetic paired SAR/optical dataset");
  req(fixture, fixture->add_option("--out", out, "Output root"));
  fixture->add_option("--pairs", pairs, "Number of pairs")->capture_default_str();
  fixture->add_option("--tile", tile, "Tile size in pixels")->capture_default_str();
  fixture->add_option("--seed", seed, "Generator seed")->capture_default_str();

  auto* scan = app.add_subcommand("scan", "Pair the dataset named by a config and report counts");
  req(scan, scan->add_option("config", config, "Run configuration (JSON)"))->check(CLI::ExistingFile);
  scan->add_option("--manifest", manifest, "Write the manifest (id, sar, optical, split)");

  for (auto* sub : app.get_subcommands({})) sub->allow_extras();
  app.allow_extras();

  try {
    app.parse(argc, argv);
    // Unknown tokens are reported before missing options so the message names them.
    std::vector<std::string> extra = app.remaining(true);
    if (!extra.empty()) throw CLI::ExtrasError(extra);
    for (auto [sub, opt] : required)
      if (sub->parsed() && opt->count() == 0) throw CLI::RequiredError(opt->get_name());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) return run_train(config, resume, stop_after, quiet);
    if (*sample) return run_sample(checkpoint, sar, out, seed, config, clip_x0, quiet);
    if (*evaluate) {
      if (evaluate->count("--fid") && fid.empty()) fid = "default";
      return run_evaluate(generated, truth, fid, csv);
    }
    if (*inspect) return run_inspect(config);
    if (*fixture) {
      check(sd_make_fixture(out.c_str(), pairs, tile, seed));
      std::printf("wrote %d pairs to %s\n", pairs, out.c_str());
      return kExitOk;
    }
    if (*scan) return run_scan(config, manifest);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error (%s): %s\n", sd_status_name(f.status), sd_last_error());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
