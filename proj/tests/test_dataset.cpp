#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "grain/dataset.hpp"
#include "oracles.hpp"

using namespace grain;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("grain_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

Dataset labelled(const std::vector<Index>& labels, Index classes) {
  Dataset d;
  for (Index c = 0; c < classes; ++c) d.class_names.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < labels.size(); ++i) d.samples.push_back({TensorXd({1, 1, 1}), labels[i], std::to_string(i)});
  return d;
}

}  // namespace

TEST_CASE("pgm P5 and P2 decode to the same tensor") {
  const std::string p5 = std::string("P5\n2 2\n255\n") + std::string("\x00\xff\x80\x40", 4);
  const TensorXd a = parse_pgm(p5);
  CHECK(a.shape() == Shape{1, 2, 2});
  CHECK(a(0, 0, 0) == 0.0);
  CHECK(a(0, 0, 1) == 1.0);
  CHECK(a(0, 1, 0) == doctest::Approx(0.50196).epsilon(1e-5));
  CHECK(a(0, 1, 1) == doctest::Approx(0.25098).epsilon(1e-5));
  CHECK(parse_pgm("P2\n# a comment\n2 2\n255\n0 255\n128 64\n") == a);
}

TEST_CASE("pgm 16-bit samples are big-endian") {
  const TensorXd t = parse_pgm(std::string("P5 2 1 65535\n", 13) + std::string("\x80\x00\xff\xff", 4));
  CHECK(t[0] == doctest::Approx(32768.0 / 65535.0));
  CHECK(t[1] == 1.0);
}

TEST_CASE("pgm rejections carry a byte offset") {
  const auto rejects = [](const std::string& bytes) {
    try {
      parse_pgm(bytes);
    } catch (const ParseError& e) {
      return std::string(e.what()).find("byte offset") != std::string::npos;
    }
    return false;
  };
  CHECK(rejects("P6\n2 2\n255\n............"));
  CHECK(rejects("P5\n2 2\n255\n\x01"));
  CHECK(rejects("P5\n0 2\n255\n"));
  CHECK(rejects("P2\n2 1\n10\n3 11\n"));
  CHECK(rejects("P5\n2 x\n255\n"));
  CHECK(rejects("P"));
}

TEST_CASE("pgm write then read round-trips quantized images") {
  Rng rng(3);
  TensorXd img({1, 7, 5});
  for (Index i = 0; i < img.size(); ++i) img[i] = static_cast<double>(rng.below(256)) / 255.0;
  CHECK(parse_pgm(encode_pgm(img)) == img);

  TempDir dir("pgm");
  write_pgm(dir.path / "a.pgm", img);
  CHECK(load_pgm(dir.path / "a.pgm") == img);
  CHECK_THROWS_AS(load_pgm(dir.path / "missing.pgm"), ParseError);
}

TEST_CASE("bilinear resize examples") {
  Rng rng(4);
  const TensorXd img = rand_uniform(rng, {1, 5, 6}, 0.0, 1.0);
  CHECK(resize_bilinear(img, 5, 6) == img);

  TensorXd flat({1, 3, 3});
  flat.vec().setConstant(0.375);
  const TensorXd big = resize_bilinear(flat, 7, 4);
  CHECK((big.vec().array() == 0.375).all());

  const TensorXd r = resize_bilinear(from_data<double>({1, 2, 2}, {0, 1, 0, 1}), 2, 3);
  CHECK(r == from_data<double>({1, 2, 3}, {0, 0.5, 1, 0, 0.5, 1}));
  CHECK_THROWS_AS(resize_bilinear(img, 0, 3), ShapeError);
}

TEST_CASE("bilinear resize stays inside the input range") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const TensorXd img = rand_uniform(rng, {1, oracle::extent(rng, 1, 9), oracle::extent(rng, 1, 9)}, 0.2, 0.7);
    const TensorXd out = resize_bilinear(img, oracle::extent(rng, 1, 15), oracle::extent(rng, 1, 15));
    CHECK(out.vec().minCoeff() >= img.vec().minCoeff());
    CHECK(out.vec().maxCoeff() <= img.vec().maxCoeff());
  }
}

TEST_CASE("directory loading") {
  TempDir dir("dirs");
  TensorXd img({1, 4, 4});
  for (const std::string cls : {"OK", "bad"}) {
    fs::create_directories(dir.path / cls);
    for (int i = 0; i < 3; ++i) write_pgm(dir.path / cls / ("im" + std::to_string(2 - i) + ".pgm"), img);
  }
  write_bytes(dir.path / "OK" / "notes.txt", "ignored");
  const Dataset d = load_dataset_dir(dir.path, 8, 6);
  CHECK(d.class_names == std::vector<std::string>{"bad", "OK"});
  CHECK(d.size() == 6);
  CHECK(d.class_counts() == std::vector<std::size_t>{3, 3});
  CHECK(d.samples[0].label == 0);
  CHECK(d.samples[0].image.shape() == Shape{1, 8, 6});
  CHECK(fs::path(d.samples[0].source).filename() == "im0.pgm");
  CHECK(fs::path(d.samples[2].source).filename() == "im2.pgm");

  fs::create_directories(dir.path / "empty");
  CHECK_THROWS_AS(load_dataset_dir(dir.path, 8, 6), DatasetError);
  fs::remove(dir.path / "empty");

  write_bytes(dir.path / "bad" / "broken.pgm", "P5\n4 4\n255\n");
  try {
    load_dataset_dir(dir.path, 8, 6);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("broken.pgm") != std::string::npos);
  }
  CHECK_THROWS_AS(load_dataset_dir(dir.path / "nowhere", 8, 6), DatasetError);
}

TEST_CASE("single-class directory loads") {
  TempDir dir("single");
  fs::create_directories(dir.path / "only");
  write_pgm(dir.path / "only" / "a.pgm", TensorXd({1, 2, 2}));
  const Dataset d = load_dataset_dir(dir.path, 2, 2);
  CHECK(d.class_names == std::vector<std::string>{"only"});
  CHECK(d.size() == 1);
}

TEST_CASE("class order is byte order except for the binary pair") {
  CHECK(canonical_class_order({"OK", "bad"}) == std::vector<std::string>{"bad", "OK"});
  CHECK(canonical_class_order({"scratches", "patches"}) == std::vector<std::string>{"patches", "scratches"});
  CHECK(canonical_class_order({"b", "OK", "bad"}) == std::vector<std::string>{"OK", "b", "bad"});
}

TEST_CASE("split sizes") {
  std::vector<Index> labels;
  for (int i = 0; i < 500; ++i) labels.push_back(i % 2);
  const auto [train, val] = split(labelled(labels, 2), 0.2, 1);
  CHECK(train.class_counts() == std::vector<std::size_t>{200, 200});
  CHECK(val.class_counts() == std::vector<std::size_t>{50, 50});

  const auto [all, none] = split(labelled(labels, 2), 0.0, 1);
  CHECK(all.size() == 500);
  CHECK(none.empty());

  const auto [t3, v3] = split(labelled({0, 0, 0, 1}, 2), 0.5, 1);
  CHECK(v3.class_counts() == std::vector<std::size_t>{2, 1});
  CHECK_THROWS_AS(split(labelled(labels, 2), 1.0, 1), RangeError);
  CHECK_THROWS_AS(split(labelled(labels, 2), -0.1, 1), RangeError);
}

TEST_CASE("split is a deterministic partition") {
  Rng rng(6);
  for (int t = 0; t < 30; ++t) {
    std::vector<Index> labels;
    const Index classes = oracle::extent(rng, 1, 4);
    const Index n = oracle::extent(rng, 1, 60);
    for (Index i = 0; i < n; ++i) labels.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(classes))));
    const Dataset d = labelled(labels, classes);
    const double f = rng.uniform(0.0, 0.9);
    const std::uint64_t seed = rng.next_u64();
    const auto [train, val] = split(d, f, seed);

    std::multiset<std::string> seen, want;
    for (const auto& s : d.samples) want.insert(s.source);
    for (const auto& s : train.samples) seen.insert(s.source);
    for (const auto& s : val.samples) seen.insert(s.source);
    CHECK(seen == want);

    const auto [train2, val2] = split(d, f, seed);
    std::vector<std::string> a, b;
    for (const auto& s : val.samples) a.push_back(s.source);
    for (const auto& s : val2.samples) b.push_back(s.source);
    CHECK(a == b);
  }
}

TEST_CASE("synthetic image follows the illumination formula") {
  SynthSpec s;
  s.width = 10;
  s.height = 4;
  s.noise_sigma = 0.0;
  s.illum_slope = 0.4;
  s.base_level = 0.8;
  const Sample smp = synth_image(s);
  CHECK(smp.label == 1);
  for (Index y = 0; y < 4; ++y) {
    CHECK(smp.image(0, y, 0) == 0.8);
    CHECK(smp.image(0, y, 9) == doctest::Approx(0.8 * (1 - 0.4 * 9.0 / 10.0)).epsilon(1e-15));
    for (Index x = 0; x < 10; ++x) CHECK(smp.image(0, y, x) == 0.8 * (1.0 - 0.4 * static_cast<double>(x) / 10.0));
  }
}

TEST_CASE("synthetic defects mark the image and stay in range") {
  for (const auto kind : {DefectKind::kScratch, DefectKind::kPit, DefectKind::kPatch}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SynthSpec s;
      s.seed = seed;
      s.noise_sigma = 0.1;
      const Sample clean = synth_image(s);
      s.defect_kind = kind;
      const Sample bad = synth_image(s);
      CHECK(bad.label == 0);
      CHECK_FALSE(bad.image == clean.image);
      CHECK(bad.image == synth_image(s).image);
      CHECK(bad.image.vec().minCoeff() >= 0.0);
      CHECK(bad.image.vec().maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("synthetic datasets") {
  const Dataset d = synth_dataset(15, 16, 16, 3, SynthMode::kBinary);
  CHECK(d.size() == 30);
  CHECK(d.class_counts() == std::vector<std::size_t>{15, 15});
  CHECK(d.class_names == std::vector<std::string>{"bad", "OK"});
  CHECK(synth_dataset(1, 8, 8, 3, SynthMode::kBinary).size() == 2);

  const Dataset again = synth_dataset(15, 16, 16, 3, SynthMode::kBinary);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.samples[i].image == again.samples[i].image);

  const Dataset two = synth_dataset(4, 16, 16, 3, SynthMode::kPatchesVsScratches);
  CHECK(two.class_names == std::vector<std::string>{"patches", "scratches"});
  CHECK_THROWS_AS(parse_synth_mode("color"), ConfigError);

  // Per-sample slopes: the left-to-right drop of the clean images varies.
  std::vector<double> drops;
  for (const auto& s : d.samples)
    if (s.label == 1) drops.push_back(s.image(0, 0, 0) - s.image(0, 0, 15));
  CHECK(*std::max_element(drops.begin(), drops.end()) - *std::min_element(drops.begin(), drops.end()) > 0.02);
}

TEST_CASE("write_dataset lays out one directory per class") {
  TempDir dir("write");
  const Dataset d = synth_dataset(3, 8, 8, 1, SynthMode::kBinary);
  CHECK(write_dataset(d, dir.path) == std::vector<std::size_t>{3, 3});
  CHECK(fs::exists(dir.path / "OK" / "0002.pgm"));
  const Dataset back = load_dataset_dir(dir.path, 8, 8);
  CHECK(back.class_names == d.class_names);
  CHECK(back.size() == 6);
}
