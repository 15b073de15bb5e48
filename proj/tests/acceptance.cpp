// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

// One PASS/FAIL line per acceptance criterion, on stdout and in
// acceptance_results.txt. Arguments, if any, select criteria by name.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "blur.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "objectives.hpp"
#include "png_io.hpp"
#include "sampler.hpp"
#include "test_util.hpp"
#include "trainer.hpp"
#include "unet.hpp"

using namespace sardiff;
using sardiff::testing::OraclePredictor;
using sardiff::testing::random_normal;
using sardiff::testing::random_uniform;
namespace fs = std::filesystem;

namespace {

// alpha_bar_1000 for beta in [1e-4, 0.02], 50-digit product.
constexpr double kAlphaBar1000 = 0.000040358297653756833148;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " (failed)");
  }
};

std::string num(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void within_time(Outcome& o, const Clock& clock, double limit) {
  const double s = clock.seconds();
  o.require(s < limit, "runtime " + num(s, 3) + " s < " + num(limit) + " s");
}

NoiseSchedule standard_schedule() { return make_linear_schedule(1000, 1e-4, 0.02); }

Outcome round_trip() {
  Clock clock;
  Outcome o;
  const auto sched = standard_schedule();
  Rng rng(101);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const int t = 1 + static_cast<int>(rng.below(1000));
    const auto x0 = random_uniform<double>(1, 3, 8, 8, 2000 + i);
    const auto eps = random_normal<double>(1, 3, 8, 8, 9000 + i);
    const auto back = predict_x0_from_eps(q_sample(x0, t, eps, sched), t, eps, sched);
    for (std::size_t k = 0; k < x0.size(); ++k) worst = std::max(worst, std::abs(back[k] - x0[k]));
  }
  o.require(worst <= 1e-5, "1000 draws, max error " + num(worst) + " <= 1e-5");
  within_time(o, clock, 10);
  return o;
}

Outcome schedule() {
  Outcome o;
  const auto sched = standard_schedule();
  const double rel = std::abs(sched.alpha_bar(1000) / kAlphaBar1000 - 1);
  o.require(rel <= 1e-6, "alpha_bar_1000 " + num(sched.alpha_bar(1000), 17) + " relative error " +
                             num(rel) + " <= 1e-6");
  bool decreasing = true;
  for (int t = 2; t <= 1000; ++t) decreasing = decreasing && sched.alpha_bar(t) < sched.alpha_bar(t - 1);
  o.require(decreasing && sched.alpha_bar(1) < 1.0, "strictly decreasing");
  return o;
}

Outcome forward_moments() {
  Clock clock;
  Outcome o;
  const auto sched = standard_schedule();
  const int draws = 100000;
  const float x0v = 0.7f;
  for (int t : {1, 250, 500, 1000}) {
    const ImageTensor x0(draws, 1, 1, 1, x0v);
    const auto eps = random_normal<float>(draws, 1, 1, 1, 4000 + t);
    const auto xt = q_sample(x0, t, eps, sched);
    double s = 0, ss = 0;
    for (float v : xt.storage()) s += v;
    const double mean = s / draws;
    for (float v : xt.storage()) ss += (v - mean) * (v - mean);
    const double var = ss / (draws - 1);
    const double want_mean = std::sqrt(sched.alpha_bar(t)) * x0v;
    const double want_var = 1 - sched.alpha_bar(t);
    const double z_mean = std::abs(mean - want_mean) / std::sqrt(want_var / draws);
    const double z_var = std::abs(var - want_var) / (want_var * std::sqrt(2.0 / (draws - 1)));
    o.require(z_mean <= 3 && z_var <= 3,
              "t=" + std::to_string(t) + " z_mean " + num(z_mean, 3) + " z_var " + num(z_var, 3));
  }
  within_time(o, clock, 30);
  return o;
}

Outcome oracle_chain() {
  Clock clock;
  Outcome o;
  const auto sched = standard_schedule();
  const auto target = random_uniform<float>(1, 3, 32, 32, 77, -0.9, 0.9);
  OraclePredictor oracle(target, sched);
  const ImageTensor cond(1, 1, 32, 32);
  const auto out = sample(oracle, cond, sched, std::uint64_t{2026});
  double mae = 0;
  for (std::size_t i = 0; i < out.size(); ++i) mae += std::abs(out[i] - target[i]);
  mae /= static_cast<double>(out.size());
  o.require(mae <= 0.05, "32x32 T=1000 MAE " + num(mae) + " <= 0.05");
  within_time(o, clock, 120);
  return o;
}

Outcome gradient() {
  Clock clock;
  Outcome o;
  UNetConfig cfg;
  cfg.base_channels = 8;
  cfg.channel_mults = {1, 2, 2};
  cfg.num_res_blocks = 1;
  cfg.time_dim = 16;
  cfg.norm_groups = 4;
  UNet<double> net(cfg, 31);
  // Jitter every parameter, zero-initialised layers included.
  Rng jitter(32);
  for (auto& t : net.parameters().tensors())
    for (auto& v : t.storage()) v += 0.05 * jitter.normal();

  const auto sched = standard_schedule();
  const BlurSpec blur{5, 1.5};
  const auto x0 = random_uniform<double>(2, 3, 16, 16, 33);
  const auto cond = random_uniform<double>(2, 1, 16, 16, 34);
  const auto eps = random_normal<double>(2, 3, 16, 16, 35);
  const std::vector<int> t{120, 800};
  auto grads = net.parameters().zeros_like();
  training_loss(net, x0, cond, t, eps, sched, blur, 1.0, &grads);

  std::vector<std::pair<std::size_t, std::size_t>> flat;
  for (std::size_t i = 0; i < net.parameters().size(); ++i)
    for (std::size_t j = 0; j < net.parameters()[i].size(); ++j) flat.emplace_back(i, j);
  Rng pick(36);
  int checked = 0, passed = 0;
  double worst = 0;
  for (int k = 0; k < 60; ++k) {
    const auto [i, j] = flat[pick.below(flat.size())];
    double& p = net.parameters()[i][j];
    const double keep = p, h = 1e-5;
    p = keep + h;
    const double up = training_loss<double>(net, x0, cond, t, eps, sched, blur, 1.0, nullptr).total;
    p = keep - h;
    const double down = training_loss<double>(net, x0, cond, t, eps, sched, blur, 1.0, nullptr).total;
    p = keep;
    const double numeric = (up - down) / (2 * h);
    const double analytic = grads[i][j];
    const double rel = std::abs(numeric - analytic) /
                       std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    worst = std::max(worst, rel);
    ++checked;
    if (rel <= 1e-3) ++passed;
  }
  o.require(checked >= 50 && passed == checked,
            std::to_string(passed) + "/" + std::to_string(checked) +
                " parameters within 1e-3, worst " + num(worst, 3));
  within_time(o, clock, 300);
  return o;
}

// Brute-force 2-D convolution with the outer-product kernel and mirrored edges.
ImageTensor direct_blur(const ImageTensor& img, const BlurSpec& spec) {
  auto mirror = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  const int r = spec.kernel_size / 2;
  std::vector<double> g(spec.kernel_size);
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += g[i + r] = std::exp(-(i * i) / (2 * spec.sigma * spec.sigma));
  ImageTensor out(img.n(), img.c(), img.h(), img.w());
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < img.h(); ++y)
        for (int x = 0; x < img.w(); ++x) {
          double acc = 0;
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx)
              acc += g[dy + r] * g[dx + r] / (sum * sum) *
                     img.at(n, c, mirror(y + dy, img.h()), mirror(x + dx, img.w()));
          out.at(n, c, y, x) = static_cast<float>(acc);
        }
  return out;
}

Outcome blur_contract() {
  Outcome o;
  const BlurSpec spec{21, 3.0};
  double dc = 0;
  for (int size : {8, 32, 64}) {
    const auto out = gaussian_blur(ImageTensor(2, 3, size, size, 0.37f), spec);
    for (float v : out.storage()) dc = std::max(dc, std::abs(double(v) - 0.37f));
  }
  o.require(dc <= 1e-6, "constant images moved by " + num(dc) + " <= 1e-6");
  const auto taps = gaussian_taps(spec);
  const double ksum = std::accumulate(taps.begin(), taps.end(), 0.0);
  o.require(std::abs(ksum - 1) <= 1e-9, "kernel sum error " + num(std::abs(ksum - 1)) + " <= 1e-9");
  double sep = 0;
  const auto img = random_uniform<float>(1, 3, 32, 32, 41);
  const auto a = gaussian_blur(img, spec);
  const auto b = direct_blur(img, spec);
  for (std::size_t i = 0; i < a.size(); ++i) sep = std::max(sep, std::abs(double(a[i]) - b[i]));
  o.require(sep <= 1e-6, "separable vs direct " + num(sep) + " <= 1e-6");
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  const double p1 = psnr(ImageTensor(1, 3, 8, 8, 0.0f), ImageTensor(1, 3, 8, 8, 0.5f));
  o.require(std::abs(p1 - 6.020599913279624) <= 1e-4, "PSNR(MSE 0.25) " + num(p1, 8));
  ImageTensor a(1, 1, 10, 10), b(1, 1, 10, 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = 0.25f;
    b[i] = (i % 2 == 0) ? 0.35f : 0.15f;
  }
  const double p2 = psnr(a, b);
  o.require(std::abs(p2 - 20.0) <= 1e-4, "PSNR(MSE 0.01) " + num(p2, 8));
  const auto img = random_uniform<float>(1, 3, 32, 32, 51, 0, 1);
  const double s = ssim(img, img);
  o.require(s == 1.0, "SSIM(a,a) " + num(s, 17));
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd f0(2, 1), f1(2, 1);
  f0 << -r, r;
  f1 << 1 - r, 1 + r;
  const double fd = frechet_distance(f0, f1);
  o.require(std::abs(fd - 1.0) <= 1e-6, "1-D Frechet " + num(fd, 10));
  std::vector<EvalPair> same;
  for (int i = 0; i < 6; ++i) {
    const auto x = random_uniform<float>(1, 3, 32, 32, 60 + i, 0, 1);
    same.push_back({"x" + std::to_string(i), x, x});
  }
  auto emb = make_embedder("default");
  const auto report = evaluate(same, emb.get());
  const double fid = report.fid.value_or(std::numeric_limits<double>::quiet_NaN());
  o.require(std::abs(fid) <= 1e-6, "FID(X,X) " + num(fid));
  return o;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("sardiff_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

TrainConfig desk_config(const fs::path& run_dir) {
  auto cfg = load_config(fs::path(SARDIFF_SOURCE_DIR) / "configs/desk.json");
  cfg.output.run_dir = run_dir;
  return cfg;
}

// Shared by the learning and determinism criteria.
struct DeskRun {
  TrainConfig cfg;
  TrainResult result;
  double seconds = 0;
  std::vector<PairRecord> held_in;
};

DeskRun& desk_run() {
  static DeskRun run = [] {
    DeskRun r;
    r.cfg = desk_config(scratch("desk"));
    Clock clock;
    r.result = train(r.cfg);
    r.seconds = clock.seconds();
    ScanOptions scan;
    scan.seed = r.cfg.training.seed;
    scan.fractions = r.cfg.data.fractions;
    const auto manifest = scan_pairs(r.cfg.data.root, scan);
    for (std::size_t i : manifest.indices(Split::kTrain)) {
      if (r.held_in.size() == 4) break;
      r.held_in.push_back(manifest.records[i]);
    }
    return r;
  }();
  return run;
}

double mean_of(const std::vector<StepRecord>& h, std::size_t from, std::size_t to) {
  double s = 0;
  for (std::size_t i = from; i < to; ++i) s += h[i].loss.total;
  return s / static_cast<double>(to - from);
}

Outcome desk_learning() {
  Outcome o;
  auto& run = desk_run();
  const auto& h = run.result.history;
  const auto& cfg = run.cfg;
  o.require(static_cast<std::int64_t>(h.size()) == cfg.training.iterations && h.size() >= 250,
            std::to_string(h.size()) + " steps at batch " + std::to_string(cfg.training.batch_size) +
                ", " + std::to_string(cfg.data.tile_size) + "px");
  if (h.size() < 250) return o;
  const double first = mean_of(h, 0, 50);
  const double last = mean_of(h, h.size() - 200, h.size());
  o.require(last <= 0.5 * first, "loss first-50 " + num(first, 4) + " last-200 " + num(last, 4) +
                                     " ratio " + num(last / first, 3) + " <= 0.5");

  Clock clock;
  const auto model = TrainedModel::load(run.result.checkpoint);
  const auto out_dir = scratch("desk_samples");
  std::vector<fs::path> sar, out;
  for (const auto& rec : run.held_in) {
    sar.push_back(rec.sar);
    out.push_back(out_dir / rec.optical.filename());
  }
  sample_files(model, sar, out, 1, {}, 4, true);
  const double sample_seconds = clock.seconds();
  std::vector<fs::path> plain;
  for (const auto& rec : run.held_in) plain.push_back(out_dir / ("plain_" + rec.optical.filename().string()));
  sample_files(model, sar, plain, 1);
  double gen_psnr = 0, plain_psnr = 0, noise_psnr = 0;
  Rng noise_rng(derive_seed(1, 0x6e6f697365ULL));
  for (std::size_t i = 0; i < sar.size(); ++i) {
    const auto truth = to_display(fit_tile(read_png(run.held_in[i].optical), cfg.data.tile_size,
                                           cfg.data.size_policy, run.held_in[i].id));
    gen_psnr += psnr(to_display(read_png(out[i])), truth);
    plain_psnr += psnr(to_display(read_png(plain[i])), truth);
    ImageTensor noise(1, 3, truth.h(), truth.w());
    noise_rng.fill_normal(noise.span());
    for (auto& v : noise.storage()) v = std::clamp(v, -1.0f, 1.0f);
    noise_psnr += psnr(to_display(quantize8(denormalize(noise))), truth);
  }
  gen_psnr /= static_cast<double>(sar.size());
  noise_psnr /= static_cast<double>(sar.size());
  plain_psnr /= static_cast<double>(sar.size());
  o.require(gen_psnr >= noise_psnr + 5,
            "4 held-in tiles PSNR " + num(gen_psnr, 4) + " dB (clipped x0) vs noise " +
                num(noise_psnr, 4) + " dB, margin " + num(gen_psnr - noise_psnr, 3) +
                " >= 5 [unclipped sampler " + num(plain_psnr, 4) + " dB]");
  const double total = run.seconds + sample_seconds;
  o.require(total <= 1800, "train + sample " + num(total, 4) + " s <= 1800 s");
  return o;
}

Outcome determinism() {
  Outcome o;
  auto& run = desk_run();
  const auto model = TrainedModel::load(run.result.checkpoint);
  std::vector<fs::path> sar;
  for (const auto& rec : run.held_in) sar.push_back(rec.sar);
  std::vector<std::vector<fs::path>> outs(2);
  for (int k = 0; k < 2; ++k) {
    const auto dir = scratch("det_" + std::to_string(k));
    for (const auto& rec : run.held_in) outs[k].push_back(dir / rec.optical.filename());
    sample_files(model, sar, outs[k], 9, {}, 4, true);
  }
  bool same = true;
  for (std::size_t i = 0; i < sar.size(); ++i) same = same && slurp(outs[0][i]) == slurp(outs[1][i]);
  o.require(same, std::to_string(sar.size()) + " tiles sampled twice, byte-identical");

  // Interrupted run: stop at 10, resume to 20, compare with the full run's log.
  const auto dir = scratch("resume");
  auto cfg = run.cfg;
  cfg.output.run_dir = dir;
  cfg.output.checkpoint_interval = 10;
  TrainOptions first;
  first.stop_after = 10;
  train(cfg, first);
  TrainOptions second;
  second.resume_from = checkpoint_path(dir, 10);
  second.stop_after = 20;
  train(cfg, second);
  std::ifstream resumed(dir / "log.csv");
  std::ifstream full(run.cfg.output.run_dir / "log.csv");
  std::string a, b;
  int rows = 0;
  bool match = true;
  std::getline(resumed, a);
  std::getline(full, b);
  while (std::getline(resumed, a)) {
    if (!std::getline(full, b) || a != b) match = false;
    ++rows;
  }
  match = match && rows >= 2;
  o.require(match, "resumed log rows " + std::to_string(rows) + " equal the uninterrupted run");
  return o;
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"round-trip", round_trip},         {"schedule", schedule},
      {"forward-moments", forward_moments}, {"oracle-chain", oracle_chain},
      {"gradient", gradient},             {"blur", blur_contract},
      {"metrics", metric_oracles},        {"desk-learning", desk_learning},
      {"determinism", determinism},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  std::ofstream report("acceptance_results.txt");
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
    report << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
