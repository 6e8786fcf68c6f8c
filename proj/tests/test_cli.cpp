#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ffasynth/data.hpp"
#include "ffasynth/image.hpp"
#include "ffasynth/saliency.hpp"

using namespace ffasynth;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "ffasynth_cli_test";

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct CliRun {
  int code;
  std::string out;
};

CliRun cli(const std::string& args) {
  const fs::path log = kRoot / "cli.log";
  const std::string cmd = std::string(FFASYNTH_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
  }
  void TearDown() override { fs::remove_all(kRoot); }
  std::string p(const std::string& rel) const { return (kRoot / rel).string(); }
};

}  // namespace

TEST_F(Cli, HelpDocumentsFlags) {
  for (const char* sub : {"preprocess", "synth", "saliency", "train", "translate", "evaluate"}) {
    CliRun r = cli(std::string(sub) + " --help");
    EXPECT_EQ(r.code, 0) << sub;
  }
  CliRun r = cli("saliency --help");
  for (const char* flag : {"--input", "--out", "--a", "--median", "--gaussian", "--raw"})
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  EXPECT_NE(r.out.find("51"), std::string::npos);
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
}

TEST_F(Cli, PreprocessEmptyAndValid) {
  fs::create_directories(p("empty"));
  CliRun e = cli("preprocess --pairs-dir " + p("empty") + " --out " + p("o"));
  EXPECT_NE(e.code, 0);
  EXPECT_NE(e.out.find("no pairs found"), std::string::npos);

  ASSERT_EQ(cli("synth --n 3 --size 64 --seed 4 --out " + p("ph")).code, 0);
  ASSERT_EQ(cli("preprocess --pairs-dir " + p("ph") + " --out " + p("d1") + " --patch 32 --roi circle --seed 2").code, 0);
  ASSERT_EQ(cli("preprocess --pairs-dir " + p("ph") + " --out " + p("d2") + " --patch 32 --roi circle --seed 2").code, 0);
  const std::string m = slurp(p("d1/manifest.json"));
  EXPECT_EQ(m, slurp(p("d2/manifest.json")));
  auto j = nlohmann::json::parse(m);
  EXPECT_EQ(j["sources"], 3);
  EXPECT_EQ(j["train"]["sources"].size() + j["test"]["sources"].size(), 3u);
  EXPECT_EQ(cli("preprocess --pairs-dir " + p("ph") + " --out " + p("d3") + " --patch 128").code, 1);
}

TEST_F(Cli, SaliencyOutputs) {
  save_png(Image(64, 64, 1, 0.4f), p("const.png"));
  ASSERT_EQ(cli("saliency --input " + p("const.png") + " --out " + p("v.png") + " --median 21").code, 0);
  Image v = load_png(p("v.png"));
  for (float x : v.data()) EXPECT_EQ(x, 128.0f / 255.0f);

  save_png(render_phantom(64, 1, 0).pair.angiography, p("a.png"));
  ASSERT_EQ(cli("saliency --input " + p("a.png") + " --out " + p("s1.png") + " --median 21 --raw " + p("r1.bin")).code, 0);
  ASSERT_EQ(cli("saliency --input " + p("a.png") + " --out " + p("s2.png") + " --median 21 --a 2 --raw " + p("r2.bin")).code, 0);
  SaliencyMap m1 = read_raw_map(p("r1.bin")), m2 = read_raw_map(p("r2.bin"));
  ASSERT_EQ(m1.data.size(), m2.data.size());
  for (std::size_t i = 0; i < m1.data.size(); ++i) EXPECT_EQ(m2.data[i], 2.0f * m1.data[i]);
  EXPECT_EQ(cli("saliency --input " + p("a.png") + " --out " + p("s3.png") + " --median 20").code, 1);
  EXPECT_EQ(cli("saliency --input " + p("missing.png") + " --out " + p("s3.png")).code, 2);
}

TEST_F(Cli, TrainTranslateEvaluate) {
  ASSERT_EQ(cli("synth --n 2 --size 64 --seed 1 --out " + p("ph")).code, 0);
  std::ofstream(p("bad.json")) << R"({"train": {"epochs": 1, "learning_rate": 1}})";
  CliRun bad = cli("train --data " + p("ph") + " --config " + p("bad.json") + " --out-dir " + p("run"));
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("train.learning_rate"), std::string::npos);

  std::ofstream(p("cfg.json")) << R"({"generator": {"base_width": 2, "n_residual_blocks": 1},
    "discriminator": {"base_width": 4}, "feature_extractor": {"width_divisor": 16},
    "saliency": {"median_kernel": 21}, "train": {"epochs": 1, "decay_start_epoch": 0}})";
  ASSERT_EQ(cli("train --data " + p("ph") + " --config " + p("cfg.json") + " --out-dir " + p("run")).code, 0);
  const std::string losses = slurp(p("run/losses.csv"));
  EXPECT_EQ(std::count(losses.begin(), losses.end(), '\n'), 3);
  // flags override the config file
  ASSERT_EQ(cli("train --data " + p("ph") + " --config " + p("cfg.json") + " --out-dir " + p("run") +
                " --resume --epochs 2 --decay-start 1")
                .code,
            0);
  EXPECT_NE(slurp(p("run/epochs.csv")).find("\n2,"), std::string::npos);

  const std::string ckpt = p("run/checkpoints/latest.ckpt");
  ASSERT_EQ(cli("translate --checkpoint " + ckpt + " --input " + p("ph") + " --out " + p("pred")).code, 0);
  EXPECT_TRUE(fs::exists(p("pred/synthetic/phantom_0_ffa.png")));
  Image out = load_png(p("pred/synthetic/phantom_0_ffa.png"));
  EXPECT_EQ(out.channels(), 1);
  ASSERT_EQ(cli("translate --checkpoint " + ckpt + " --input " + p("ph/synthetic/phantom_0_struct.png") +
                " --out " + p("again.png"))
                .code,
            0);
  EXPECT_EQ(slurp(p("again.png")), slurp(p("pred/synthetic/phantom_0_ffa.png")));
  EXPECT_EQ(cli("translate --checkpoint " + p("nope.ckpt") + " --input " + p("ph") + " --out " + p("x")).code, 2);

  CliRun same = cli("evaluate --pred-dir " + p("ph") + " --ref-dir " + p("ph") + " --report " + p("rep.csv"));
  EXPECT_EQ(same.code, 0);
  EXPECT_NE(same.out.find("mean SSIM: 1\n"), std::string::npos);
  CliRun ev = cli("evaluate --pred-dir " + p("pred") + " --ref-dir " + p("ph") + " --ssim-mode windowed");
  EXPECT_EQ(ev.code, 0);
  save_png(Image(64, 64, 1), p("other/zzz.png"));
  EXPECT_NE(cli("evaluate --pred-dir " + p("other") + " --ref-dir " + p("ph")).code, 0);
}
