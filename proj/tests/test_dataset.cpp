// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "dataset.hpp"
#include "errors.hpp"
#include "fixture.hpp"
#include "png_io.hpp"
#include "test_util.hpp"

using namespace sardiff;
using sardiff::testing::scratch_dir;

namespace {

RawImage solid(int w, int h, int channels, std::uint16_t value, int depth = 8) {
  RawImage img;
  img.width = w;
  img.height = h;
  img.channels = channels;
  img.bit_depth = depth;
  img.samples.assign(static_cast<std::size_t>(w) * h * channels, value);
  return img;
}

// Writes s1/<name> and (optionally) s2/<name> under root/<scene>.
void add_pair(const fs::path& root, const std::string& scene, const std::string& name,
              bool with_optical = true, int size = 16) {
  fs::create_directories(root / scene / "s1");
  fs::create_directories(root / scene / "s2");
  write_png(root / scene / "s1" / name, solid(size, size, 1, 100));
  if (with_optical) write_png(root / scene / "s2" / name, solid(size, size, 3, 200));
}

fs::path make_tree(const std::string& tag, int pairs) {
  const auto root = scratch_dir(tag);
  for (int i = 0; i < pairs; ++i) add_pair(root, "scene", "tile" + std::to_string(i) + ".png");
  return root;
}

}  // namespace

TEST_CASE("scan pairs s1 tiles with their s2 counterparts") {
  const auto root = scratch_dir("scan_one");
  add_pair(root, "scene", "a.png");
  const auto m = scan_pairs(root);
  REQUIRE(m.records.size() == 1);
  CHECK(m.orphans.empty());
  CHECK(m.records[0].sar == root / "scene" / "s1" / "a.png");
  CHECK(m.records[0].optical == root / "scene" / "s2" / "a.png");
  CHECK(m.records[0].id == "scene/s1/a");
}

TEST_CASE("a SAR tile without optical counterpart is an orphan") {
  const auto root = scratch_dir("scan_orphan");
  add_pair(root, "scene", "a.png", /*with_optical=*/false);
  ScanOptions opts;
  opts.allow_empty = true;
  const auto m = scan_pairs(root, opts);
  CHECK(m.records.empty());
  REQUIRE(m.orphans.size() == 1);
  CHECK_THROWS_AS(scan_pairs(root), EmptyDatasetError);
}

TEST_CASE("SEN12-style names pair across s1_N and s2_N directories") {
  const auto root = scratch_dir("scan_sen12");
  fs::create_directories(root / "ROIs1158_spring" / "s1_7");
  fs::create_directories(root / "ROIs1158_spring" / "s2_7");
  write_png(root / "ROIs1158_spring/s1_7/ROIs1158_spring_s1_7_p30.png", solid(8, 8, 1, 3));
  write_png(root / "ROIs1158_spring/s2_7/ROIs1158_spring_s2_7_p30.png", solid(8, 8, 3, 3));
  write_png(root / "ROIs1158_spring/s2_7/ROIs1158_spring_s2_7_p31.png", solid(8, 8, 3, 3));
  const auto m = scan_pairs(root);
  REQUIRE(m.records.size() == 1);
  CHECK(m.records[0].optical.filename() == "ROIs1158_spring_s2_7_p30.png");
  CHECK(m.orphans.size() == 1);
}

TEST_CASE("a missing root is an I/O error") {
  CHECK_THROWS_AS(scan_pairs(fs::temp_directory_path() / "sardiff_no_such_dir"), IoError);
}

TEST_CASE("split assignment is deterministic, disjoint and exhaustive") {
  const auto root = make_tree("split", 10);
  ScanOptions opts;
  opts.fractions = {0.8, 0.2, 0.0};
  opts.seed = 42;
  const auto a = scan_pairs(root, opts);
  const auto b = scan_pairs(root, opts);
  REQUIRE(a.records.size() == 10);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].id == b.records[i].id);
    CHECK(a.records[i].split == b.records[i].split);
    CHECK(a.records[i].split == assign_split(a.records[i].id, 42, opts.fractions));
  }
  const auto tr = a.indices(Split::kTrain), va = a.indices(Split::kVal), te = a.indices(Split::kTest);
  CHECK(tr.size() + va.size() + te.size() == 10);
  CHECK(te.empty());
  std::set<std::size_t> all(tr.begin(), tr.end());
  for (auto i : va) CHECK(all.insert(i).second);
  CHECK(all.size() == 10);

  // Over many ids the split sizes follow the fractions.
  const SplitFractions f{0.6, 0.3, 0.1};
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 20000; ++i)
    ++counts[static_cast<int>(assign_split("id" + std::to_string(i), 9, f))];
  CHECK(counts[0] / 20000.0 == doctest::Approx(0.6).epsilon(0.03));
  CHECK(counts[1] / 20000.0 == doctest::Approx(0.3).epsilon(0.05));
  CHECK(counts[2] / 20000.0 == doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("split fractions are validated") {
  CHECK_THROWS_AS((SplitFractions{0.5, 0.2, 0.2}.validate()), ParameterError);
  CHECK_THROWS_AS((SplitFractions{1.2, -0.2, 0.0}.validate()), ParameterError);
  CHECK_NOTHROW((SplitFractions{0.7, 0.2, 0.1}.validate()));
  CHECK(split_from_string("val") == Split::kVal);
  CHECK_THROWS_AS(split_from_string("holdout"), ParameterError);
}

TEST_CASE("manifest file lists one pair per line") {
  const auto root = make_tree("manifest", 3);
  const auto m = scan_pairs(root);
  m.write(root / "manifest.tsv");
  std::ifstream in(root / "manifest.tsv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    CHECK(std::count(line.begin(), line.end(), '\t') == 3);
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("normalisation maps sample endpoints to -1 and +1") {
  RawImage img = solid(3, 1, 1, 0);
  img.samples = {0, 128, 255};
  const auto t = normalize(img);
  CHECK(t.at(0, 0, 0, 0) == -1.0f);
  CHECK(t.at(0, 0, 0, 1) == doctest::Approx(0.00392157).epsilon(1e-5));
  CHECK(t.at(0, 0, 0, 2) == 1.0f);

  RawImage deep = solid(2, 1, 1, 0, 16);
  deep.samples = {0, 65535};
  const auto d = normalize(deep);
  CHECK(d.at(0, 0, 0, 0) == -1.0f);
  CHECK(d.at(0, 0, 0, 1) == 1.0f);

  RawImage rgb = solid(2, 1, 3, 0);
  rgb.samples = {0, 51, 255, 255, 0, 51};  // HWC
  const auto c = normalize(rgb);
  REQUIRE(c.c() == 3);
  CHECK(c.at(0, 0, 0, 0) == -1.0f);
  CHECK(c.at(0, 1, 0, 0) == doctest::Approx(-0.6f));
  CHECK(c.at(0, 2, 0, 0) == 1.0f);
  CHECK(c.at(0, 0, 0, 1) == 1.0f);
}

TEST_CASE("every 8-bit value survives normalise, denormalise, quantise") {
  RawImage img = solid(256, 1, 1, 0);
  for (int v = 0; v < 256; ++v) img.samples[v] = static_cast<std::uint16_t>(v);
  const auto back = quantize8(denormalize(normalize(img)));
  REQUIRE(back.samples.size() == 256);
  for (int v = 0; v < 256; ++v) CHECK(back.samples[v] == v);

  ImageTensor ends(1, 1, 1, 2);
  ends[0] = -1.0f;
  ends[1] = 1.0f;
  const auto dn = denormalize(ends);
  CHECK(dn[0] == 0.0f);
  CHECK(dn[1] == 1.0f);
  ImageTensor outside(1, 1, 1, 2);
  outside[0] = -3.0f;
  outside[1] = 2.5f;
  const auto clamped = denormalize(outside);
  CHECK(clamped[0] == 0.0f);
  CHECK(clamped[1] == 1.0f);
}

TEST_CASE("tiles are center-cropped or rejected") {
  RawImage img = solid(6, 4, 1, 0);
  for (std::size_t i = 0; i < img.samples.size(); ++i) img.samples[i] = static_cast<std::uint16_t>(i);
  const auto crop = fit_tile(img, 2, SizePolicy::kCenterCrop, "x");
  CHECK(crop.width == 2);
  CHECK(crop.height == 2);
  // Rows 1..2, columns 2..3 of the 6-wide image.
  CHECK(crop.samples == std::vector<std::uint16_t>{8, 9, 14, 15});
  CHECK_THROWS_AS(fit_tile(img, 2, SizePolicy::kReject, "x"), ShapeError);
  CHECK_THROWS_AS(fit_tile(img, 8, SizePolicy::kCenterCrop, "x"), ShapeError);
  const auto same = fit_tile(solid(4, 4, 1, 7), 4, SizePolicy::kReject, "x");
  CHECK(same.samples.size() == 16);
}

TEST_CASE("loading checks channels and decodes") {
  const auto root = scratch_dir("load");
  add_pair(root, "scene", "good.png");
  fs::create_directories(root / "bad" / "s1");
  fs::create_directories(root / "bad" / "s2");
  write_png(root / "bad/s1/rgb.png", solid(16, 16, 3, 1));
  write_png(root / "bad/s2/rgb.png", solid(16, 16, 3, 1));
  std::ofstream(root / "bad/s1/junk.png") << "not a png";
  write_png(root / "bad/s2/junk.png", solid(16, 16, 3, 1));

  const auto m = scan_pairs(root);
  LoadOptions opts;
  opts.tile_size = 16;
  for (const auto& r : m.records) {
    if (r.id == "scene/s1/good") {
      const auto s = load_pair(r, opts);
      CHECK(s.sar.c() == 1);
      CHECK(s.optical.c() == 3);
      CHECK(s.sar.h() == s.optical.h());
      CHECK(s.sar.at(0, 0, 0, 0) == doctest::Approx(2.0 * 100 / 255 - 1));
      CHECK(s.optical.at(0, 2, 5, 5) == doctest::Approx(2.0 * 200 / 255 - 1));
    } else if (r.id == "bad/s1/rgb") {
      CHECK_THROWS_AS(load_pair(r, opts), ShapeError);
    } else if (r.id == "bad/s1/junk") {
      CHECK_THROWS_AS(load_pair(r, opts), DecodeError);
    }
  }
}

TEST_CASE("the SAR stretch maps the percentile range onto [-1, 1]") {
  const auto root = scratch_dir("stretch");
  fs::create_directories(root / "s" / "s1");
  fs::create_directories(root / "s" / "s2");
  RawImage sar = solid(10, 10, 1, 0);
  for (int i = 0; i < 100; ++i) sar.samples[i] = static_cast<std::uint16_t>(100 + i / 2);
  write_png(root / "s/s1/t.png", sar);
  write_png(root / "s/s2/t.png", solid(10, 10, 3, 0));
  const auto m = scan_pairs(root);
  LoadOptions opts;
  opts.tile_size = 10;
  opts.sar_stretch = true;
  opts.stretch_low = 0;
  opts.stretch_high = 100;
  const auto s = load_pair(m.records[0], opts);
  const auto [lo, hi] = std::minmax_element(s.sar.storage().begin(), s.sar.storage().end());
  CHECK(*lo == -1.0f);
  CHECK(*hi == 1.0f);
}

TEST_CASE("batches cover the split and keep the short tail") {
  const auto b = epoch_batches(10, 4, 1, 0);
  REQUIRE(b.size() == 3);
  CHECK(b[0].size() == 4);
  CHECK(b[1].size() == 4);
  CHECK(b[2].size() == 2);
  std::set<std::size_t> seen;
  for (const auto& batch : b)
    for (auto i : batch) seen.insert(i);
  CHECK(seen.size() == 10);
  CHECK_THROWS_AS(epoch_batches(10, 0, 1, 0), ParameterError);

  const auto root = make_tree("stream", 10);
  PairedDataset data(scan_pairs(root), Split::kTrain, LoadOptions{1, 16});
  BatchStream stream(data, 4, 1, 0);
  CHECK(stream.batches() == 3);
  std::vector<int> sizes;
  Batch batch;
  while (stream.next(batch)) {
    sizes.push_back(batch.x0.n());
    CHECK(batch.cond.n() == batch.x0.n());
    CHECK(batch.ids.size() == static_cast<std::size_t>(batch.x0.n()));
  }
  CHECK(sizes == std::vector<int>{4, 4, 2});
}

TEST_CASE("epoch order is reproducible and changes between epochs") {
  CHECK(epoch_order(32, 5, 3) == epoch_order(32, 5, 3));
  CHECK(epoch_order(32, 5, 3) != epoch_order(32, 6, 3));
  std::set<std::vector<std::size_t>> orders;
  for (std::uint64_t e = 0; e < 100; ++e) orders.insert(epoch_order(10, 11, e));
  CHECK(orders.size() >= 99);
  auto sorted = epoch_order(10, 11, 7);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("an empty split is reported") {
  const auto root = make_tree("empty_split", 3);
  CHECK_THROWS_AS(PairedDataset(scan_pairs(root), Split::kTest, LoadOptions{1, 16}),
                  EmptyDatasetError);
  PairedDataset data(scan_pairs(root), Split::kTrain, LoadOptions{1, 16});
  CHECK_THROWS_AS(data.get(3), IndexError);
}

TEST_CASE("cached and uncached loads agree") {
  const auto root = scratch_dir("fixture_cache");
  write_fixture(root, 4, 16, 3);
  const auto m = scan_pairs(root);
  REQUIRE(m.records.size() == 4);
  PairedDataset cached(m, Split::kTrain, LoadOptions{1, 16}, true);
  PairedDataset fresh(m, Split::kTrain, LoadOptions{1, 16}, false);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(cached.get(i).optical.storage() == fresh.get(i).optical.storage());
    CHECK(cached.get(i).sar.storage() == fresh.get(i).sar.storage());
  }
}

TEST_CASE("the synthetic fixture is reproducible") {
  const auto a = make_synthetic_pair(32, 2026, 5);
  const auto b = make_synthetic_pair(32, 2026, 5);
  const auto c = make_synthetic_pair(32, 2026, 6);
  CHECK(a.sar.samples == b.sar.samples);
  CHECK(a.optical.samples == b.optical.samples);
  CHECK(a.optical.samples != c.optical.samples);
  CHECK(a.sar.channels == 1);
  CHECK(a.optical.channels == 3);
}
