// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;  // stdout and stderr
};

Run cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SARDIFF_CLI + "\" " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  Run r{0, {}};
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("sardiff_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("help at every level exits 0") {
  for (const char* args : {"--help", "train --help", "sample --help", "evaluate --help",
                           "inspect-schedule --help", "make-fixture --help", "scan --help"}) {
    const auto r = cli(args);
    CHECK_MESSAGE(r.code == 0, args);
    CHECK_MESSAGE(r.out.find("Usage") != std::string::npos, args);
  }
  CHECK(cli("--version").code == 0);
}

TEST_CASE("usage errors exit 1") {
  CHECK(cli("").code == 1);
  CHECK(cli("frobnicate").code == 1);
  const auto bogus = cli("train --bogus");
  CHECK(bogus.code == 1);
  CHECK(bogus.out.find("--bogus") != std::string::npos);
  CHECK(cli("train").code == 1);
  CHECK(cli("sample").code == 1);
  CHECK(cli("evaluate --generated a").code == 1);
  CHECK(cli("train /no/such/config.json").code == 1);
}

TEST_CASE("runtime failures exit 2 with a message") {
  const auto dir = fresh_dir("runtime");
  std::ofstream(dir / "bad.json") << R"({"version": 1, "trainig": {}})";
  const auto r = cli("train " + q(dir / "bad.json"));
  CHECK(r.code == 2);
  CHECK(r.out.find("trainig") != std::string::npos);
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  CHECK(cli("evaluate --generated " + q(dir / "a") + " --truth " + q(dir / "b")).code == 2);
}

TEST_CASE("inspect-schedule prints one row per step") {
  const auto dir = fresh_dir("inspect");
  std::ofstream(dir / "c.json") << R"({"version": 1})";
  const auto r = cli("inspect-schedule " + q(dir / "c.json"));
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line, last;
  std::getline(lines, line);
  CHECK(line == "t,beta,alpha_bar,sigma");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == 1000);
  CHECK(last.rfind("1000,0.02", 0) == 0);
}

TEST_CASE("train, sample twice, evaluate") {
  const auto dir = fresh_dir("flow");
  REQUIRE(cli("make-fixture --out " + q(dir / "data") + " --pairs 4 --tile 16 --seed 3").code == 0);
  std::ofstream(dir / "tiny.json") << R"({
    "version": 1,
    "schedule": {"T": 20},
    "model": {"base_channels": 8, "channel_mults": [1, 2], "time_dim": 16, "norm_groups": 4},
    "loss": {"blur": {"kernel_size": 5, "sigma": 1.5}},
    "training": {"iterations": 3, "batch_size": 2, "seed": 2},
    "data": {"root": "data", "tile_size": 16},
    "output": {"run_dir": "run"}
  })";
  const auto scan = cli("scan " + q(dir / "tiny.json"));
  CHECK(scan.code == 0);
  CHECK(scan.out.find("pairs=4 orphans=0") != std::string::npos);

  const auto train = cli("train -q " + q(dir / "tiny.json"));
  REQUIRE(train.code == 0);
  const auto ckpt = dir / "run" / "final.ckpt";
  REQUIRE(fs::exists(ckpt));
  CHECK(fs::exists(dir / "run" / "log.csv"));

  const auto sar = dir / "data/ROIs0000_synth/s1_0";
  for (const char* out : {"g1", "g2"})
    REQUIRE(cli("sample -q " + q(ckpt) + " --sar " + q(sar) + " --out " + q(dir / out) +
                " --seed 11")
                .code == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "g1")) {
    const auto name = e.path().filename();
    CHECK(name.string().find("_s2_") != std::string::npos);
    CHECK(slurp(e.path()) == slurp(dir / "g2" / name));
    ++files;
  }
  CHECK(files == 4);
  REQUIRE(cli("sample -q " + q(ckpt) + " --sar " + q(sar) + " --out " + q(dir / "g3") +
              " --seed 12")
              .code == 0);
  CHECK(slurp(dir / "g1/ROIs0000_synth_s2_0_p0.png") != slurp(dir / "g3/ROIs0000_synth_s2_0_p0.png"));
  REQUIRE(cli("sample -q --clip-x0 " + q(ckpt) + " --sar " + q(sar) + " --out " + q(dir / "g5") +
              " --seed 11")
              .code == 0);
  CHECK(fs::exists(dir / "g5/ROIs0000_synth_s2_0_p3.png"));

  std::ofstream(dir / "other.json") << R"({"version": 1, "schedule": {"T": 30}})";
  const auto mismatch = cli("sample -q " + q(ckpt) + " --sar " + q(sar) + " --out " +
                            q(dir / "g4") + " --seed 1 --config " + q(dir / "other.json"));
  CHECK(mismatch.code == 2);
  CHECK(mismatch.out.find("schedule") != std::string::npos);

  const auto truth = dir / "data/ROIs0000_synth/s2_0";
  const auto same = cli("evaluate --generated " + q(truth) + " --truth " + q(truth) + " --fid");
  CHECK(same.code == 0);
  CHECK(same.out.find("ssim=1.000000") != std::string::npos);
  CHECK(same.out.find("embedder=moments-randproj64") != std::string::npos);

  const auto gen = cli("evaluate --generated " + q(dir / "g1") + " --truth " + q(truth) +
                       " --out " + q(dir / "m.csv"));
  CHECK(gen.code == 0);
  CHECK(gen.out.rfind("pairs=4 psnr=", 0) == 0);
  CHECK(slurp(dir / "m.csv").rfind("id,psnr,ssim\n", 0) == 0);
}
