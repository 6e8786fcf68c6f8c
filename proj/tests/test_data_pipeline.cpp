#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "ffasynth/data.hpp"
#include "ffasynth/error.hpp"

using namespace ffasynth;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<AlignedPair> fake_pairs(Category c, int n) {
  std::vector<AlignedPair> v;
  for (int i = 0; i < n; ++i) {
    AlignedPair p{Image(4, 4, 3), Image(4, 4, 1), c, to_string(c) + "_" + std::to_string(1000 + i), "", {}};
    v.push_back(std::move(p));
  }
  return v;
}

}  // namespace

TEST(Ingest, EmptyDirectory) {
  TempDir d("ffasynth_ingest_empty");
  auto r = ingest_pairs(d.path);
  EXPECT_TRUE(r.pairs.empty());
}

TEST(Ingest, OrphansAndMismatches) {
  TempDir d("ffasynth_ingest");
  const fs::path c = d.path / "normal";
  for (const char* id : {"b", "a", "c"}) {
    save_png(Image(8, 8, 3, 0.5f), c / (std::string(id) + "_struct.png"));
    save_png(Image(8, 8, 1, 0.25f), c / (std::string(id) + "_ffa.png"));
  }
  save_png(Image(8, 8, 3), c / "orphan_struct.png");
  save_png(Image(8, 8, 3), d.path / "punctate-focal-leakage" / "bad_struct.png");
  save_png(Image(8, 9, 1), d.path / "punctate-focal-leakage" / "bad_ffa.png");
  auto r = ingest_pairs(d.path);
  ASSERT_EQ(r.pairs.size(), 3u);
  EXPECT_EQ(r.pairs[0].source_id, "a");
  EXPECT_EQ(r.pairs[2].source_id, "c");
  EXPECT_EQ(r.pairs[0].category, Category::normal);
  EXPECT_EQ(r.pairs[0].structure.channels(), 3);
  EXPECT_EQ(r.pairs[0].angiography.channels(), 1);
  EXPECT_EQ(r.warnings.size(), 2u);
  auto again = ingest_pairs(d.path);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(again.pairs[i].angiography, r.pairs[i].angiography);
  auto excl = ingest_pairs(d.path, {"b"});
  EXPECT_EQ(excl.pairs.size(), 2u);
}

TEST(Ingest, ExclusionList) {
  TempDir d("ffasynth_excl");
  std::ofstream(d.path / "ex.txt") << "one\n\n  two  \n";
  EXPECT_EQ(read_exclusion_list(d.path / "ex.txt"), (std::set<std::string>{"one", "two"}));
  EXPECT_THROW(read_exclusion_list(d.path / "none.txt"), DataError);
}

TEST(Preprocess, WholePatchAndRoi) {
  AlignedPair p{Image(64, 64, 3, 0.5f), Image(64, 64, 1, 0.7f), Category::normal, "s", "", {}};
  auto one = preprocess_pair(p, {64, 64, 64, 64, RoiMode::none});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].structure, p.structure);
  EXPECT_EQ(one[0].parent_id, "s");
  auto masked = preprocess_pair(p, {32, 32, 32, 32, RoiMode::circle});
  ASSERT_EQ(masked.size(), 4u);
  for (const auto& m : masked) {
    for (auto [x, y] : {std::pair{0, 0}, std::pair{31, 0}, std::pair{0, 31}, std::pair{31, 31}}) {
      EXPECT_EQ(m.angiography.at(x, y), 0.0f);
      for (int c = 0; c < 3; ++c) EXPECT_EQ(m.structure.at(x, y, c), 0.0f);
    }
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) EXPECT_EQ(m.angiography.at(x, y) == 0.0f, m.structure.at(x, y, 0) == 0.0f);
  }
  EXPECT_EQ(masked[1].origin, (PatchOrigin{32, 0}));
  EXPECT_EQ(masked[1].source_id, "s_x32_y0");
  auto rect = preprocess_pair(AlignedPair{Image(720, 576, 3), Image(720, 576, 1), Category::normal, "i", "", {}},
                              {360, 288, 360, 288, RoiMode::none});
  EXPECT_EQ(rect.size(), 4u);
  EXPECT_THROW(preprocess_pair(p, {65, 65, 65, 65, RoiMode::none}), ParameterError);
}

TEST(Split, Arithmetic) {
  EXPECT_EQ(test_count(10, 0.8), 2u);
  EXPECT_EQ(test_count(302, 0.8), 60u);
  EXPECT_EQ(test_count(151, 0.8), 30u);
  EXPECT_EQ(test_count(448, 0.8), 90u);
  EXPECT_EQ(test_count(329, 0.8), 66u);
}

TEST(Split, PerCategoryAndDeterministic) {
  std::vector<AlignedPair> all;
  for (auto [c, n] : {std::pair{Category::normal, 302}, std::pair{Category::optic_disc_leakage, 151},
                      std::pair{Category::large_focal_leakage, 448}, std::pair{Category::punctate_focal_leakage, 329}}) {
    auto v = fake_pairs(c, n);
    all.insert(all.end(), v.begin(), v.end());
  }
  DatasetSplit a = split_dataset(all, 0.8, 42), b = split_dataset(all, 0.8, 42), c = split_dataset(all, 0.8, 43);
  std::map<Category, int> tests;
  std::set<std::string> test_ids, train_ids;
  for (const auto& p : a.test) ++tests[p.category], test_ids.insert(p.source_id);
  for (const auto& p : a.train) train_ids.insert(p.source_id);
  EXPECT_EQ(tests[Category::normal], 60);
  EXPECT_EQ(tests[Category::optic_disc_leakage], 30);
  EXPECT_EQ(tests[Category::large_focal_leakage], 90);
  EXPECT_EQ(tests[Category::punctate_focal_leakage], 66);
  EXPECT_EQ(train_ids.size() + test_ids.size(), all.size());
  for (const auto& id : test_ids) EXPECT_EQ(train_ids.count(id), 0u);
  ASSERT_EQ(a.test.size(), b.test.size());
  for (std::size_t i = 0; i < a.test.size(); ++i) EXPECT_EQ(a.test[i].source_id, b.test[i].source_id);
  bool differs = false;
  for (std::size_t i = 0; i < a.test.size(); ++i) differs |= a.test[i].source_id != c.test[i].source_id;
  EXPECT_TRUE(differs);
}

TEST(Split, TinyCategoryGoesToTrain) {
  auto v = fake_pairs(Category::normal, 1);
  auto w = fake_pairs(Category::synthetic, 10);
  v.insert(v.end(), w.begin(), w.end());
  DatasetSplit s = split_dataset(v, 0.8, 0);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_EQ(s.train.size(), 9u);
  EXPECT_EQ(s.warnings.size(), 1u);
  EXPECT_THROW(split_dataset(v, 1.0, 0), ParameterError);
}

TEST(Phantom, DeterministicAndBlobOnlyInAngiography) {
  auto a = synth_phantom_pairs(4, 64, 9), b = synth_phantom_pairs(4, 64, 9);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(a[i].structure, b[i].structure);
    EXPECT_EQ(a[i].angiography, b[i].angiography);
    EXPECT_EQ(a[i].source_id, "phantom_" + std::to_string(i));
  }
  EXPECT_THROW(synth_phantom_pairs(1, 32, 0), ParameterError);
  int blobs = 0;
  for (int i = 0; i < 16; ++i) {
    PhantomRender r = render_phantom(96, 3, i);
    const Image& with = r.pair.angiography;
    const Image& without = r.angiography_without_blob;
    if (!r.blob) {
      EXPECT_EQ(with, without);
      continue;
    }
    ++blobs;
    EXPECT_GE(r.blob->sigma, 5.0);
    EXPECT_LE(r.blob->sigma, 15.0);
    for (int y = 0; y < 96; ++y)
      for (int x = 0; x < 96; ++x) {
        const double d = std::hypot(x + 0.5 - r.blob->cx, y + 0.5 - r.blob->cy);
        if (d > r.blob->support_radius()) EXPECT_EQ(with.at(x, y), without.at(x, y));
        if (d < r.blob->sigma && without.at(x, y) < 0.5f) EXPECT_GT(with.at(x, y), without.at(x, y));
      }
  }
  EXPECT_GT(blobs, 2);
  EXPECT_LT(blobs, 14);
}

TEST(Phantom, VesselsDarkInStructureBrightInAngiography) {
  PhantomRender r = render_phantom(64, 1, 0);
  float lo = 1, hi = 0;
  int x_hi = 0, y_hi = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      float v = r.angiography_without_blob.at(x, y);
      lo = std::min(lo, v);
      if (v > hi) hi = v, x_hi = x, y_hi = y;
    }
  EXPECT_NEAR(lo, 0.08f, 1e-6);
  EXPECT_GT(hi, 0.5f);
  EXPECT_LT(r.pair.structure.at(x_hi, y_hi, 0), 0.5f);
}

TEST(Manifest, Contents) {
  DatasetSplit s = split_dataset(fake_pairs(Category::normal, 10), 0.8, 5);
  auto j = split_manifest(s, PatchSpec{}, 8, 2);
  EXPECT_EQ(j["seed"], 5);
  EXPECT_EQ(j["sources"], 10);
  EXPECT_EQ(j["test"]["counts"]["normal"], 2);
  EXPECT_EQ(j["train"]["patches"], 8);
}
