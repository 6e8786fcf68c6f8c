#include <gtest/gtest.h>

#include "ffasynth/config.hpp"
#include "ffasynth/error.hpp"

using namespace ffasynth;
using nlohmann::json;

TEST(Config, EmptyGivesDefaults) {
  RunConfig c = run_config_from_json(json::object());
  EXPECT_EQ(c, RunConfig{});
  EXPECT_EQ(c.train.epochs, 200);
  EXPECT_EQ(c.train.loss_weights.alpha, 100.0);
  EXPECT_EQ(c.model.discriminator, DiscriminatorConfig::patch_gan());
}

TEST(Config, RoundTrip) {
  RunConfig c;
  c.train.epochs = 7;
  c.train.decay_start_epoch = 3;
  c.train.loss_weights.gamma = 0.0;
  c.train.grad_mode = SaliencyGradMode::exact_median;
  c.model.generator.n_residual_blocks = 3;
  c.model.discriminator = DiscriminatorConfig::image_gan(16);
  c.model.features.width_divisor = 4;
  c.ssim.mode = SSIMParams::Mode::windowed;
  EXPECT_EQ(run_config_from_json(to_json(c)), c);
}

TEST(Config, UnknownKeysNamed) {
  try {
    run_config_from_json(json{{"train", {{"epochz", 3}}}});
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("train.epochz"), std::string::npos);
  }
  EXPECT_THROW(run_config_from_json(json{{"bogus", 1}}), ParameterError);
  EXPECT_THROW(run_config_from_json(json{{"train", {{"epochs", "many"}}}}), ParameterError);
}

TEST(Config, OverridesOnlyGivenKeys) {
  RunConfig base;
  base.train.seed = 9;
  RunConfig c = run_config_from_json(json{{"loss_weights", {{"gamma", 0}}}}, base);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.train.loss_weights.gamma, 0.0);
  EXPECT_EQ(c.train.loss_weights.alpha, 100.0);
}

TEST(Config, AblationsDifferOnlyWhereExpected) {
  const json full = to_json(RunConfig{});
  const json no_sal = to_json(run_config_from_json(json{{"loss_weights", {{"gamma", 0}}}}));
  const json no_patch = to_json(run_config_from_json(json{{"discriminator", {{"preset", "imagegan"}}}}));
  json d1 = json::diff(full, no_sal), d2 = json::diff(full, no_patch);
  ASSERT_EQ(d1.size(), 1u);
  EXPECT_EQ(d1[0]["path"], "/loss_weights/gamma");
  for (const auto& op : d2) EXPECT_EQ(op["path"].get<std::string>().rfind("/discriminator/", 0), 0u);
  EXPECT_FALSE(d2.empty());
}

TEST(Config, Validation) {
  EXPECT_THROW(run_config_from_json(json{{"train", {{"decay_start_epoch", 300}}}}), ParameterError);
  EXPECT_THROW(run_config_from_json(json{{"discriminator", {{"preset", "tiny"}}}}), ParameterError);
  EXPECT_THROW(run_config_from_json(json{{"feature_extractor", {{"mode", "imagenet"}}}}), ParameterError);
}
