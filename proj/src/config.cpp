#include "ffasynth/config.hpp"

#include <fstream>
#include <set>

#include "ffasynth/error.hpp"

namespace ffasynth {

using nlohmann::json;

namespace {

// Reads optional keys of one JSON object and rejects any key it was not asked about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParameterError("config section '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ParameterError("config key '" + qualified(key) + "' has the wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ParameterError("unknown config key '" + qualified(key) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_generator(const json& j, GeneratorConfig& c, const std::string& path) {
  Section s(j, path);
  s.get("in_channels", c.in_channels);
  s.get("out_channels", c.out_channels);
  s.get("base_width", c.base_width);
  s.get("n_residual_blocks", c.n_residual_blocks);
  s.get("downsample_steps", c.downsample_steps);
  s.get("use_dropout", c.use_dropout);
  s.get("dropout_p", c.dropout_p);
  s.finish();
}

void read_discriminator(const json& j, DiscriminatorConfig& c, const std::string& path) {
  Section s(j, path);
  std::string preset;
  int base_width = 64;
  s.get("preset", preset);
  s.get("base_width", base_width);
  if (!preset.empty()) {
    if (preset == "patchgan") {
      c = DiscriminatorConfig::patch_gan(base_width);
    } else if (preset == "imagegan") {
      c = DiscriminatorConfig::image_gan(base_width);
    } else {
      throw ParameterError("config key '" + s.qualified("preset") + "' must be patchgan or imagegan");
    }
  } else if (j.contains("base_width")) {
    c = DiscriminatorConfig::patch_gan(base_width);
  }
  s.get("in_channels", c.in_channels);
  s.get("kernel", c.kernel);
  s.get("strides", c.strides);
  s.get("widths", c.widths);
  s.get("leaky_slope", c.leaky_slope);
  s.finish();
}

void read_features(const json& j, FeatureExtractorConfig& c, const std::string& path) {
  Section s(j, path);
  std::string mode = c.mode == FeatureExtractorConfig::Mode::pretrained ? "pretrained" : "fixed-random";
  std::string weights = c.weights.string();
  s.get("mode", mode);
  s.get("seed", c.seed);
  s.get("weights", weights);
  s.get("tap_pool", c.tap_pool);
  s.get("tap_conv", c.tap_conv);
  s.get("width_divisor", c.width_divisor);
  s.finish();
  if (mode == "fixed-random") {
    c.mode = FeatureExtractorConfig::Mode::fixed_random;
  } else if (mode == "pretrained") {
    c.mode = FeatureExtractorConfig::Mode::pretrained;
  } else {
    throw ParameterError("config key '" + s.qualified("mode") + "' must be fixed-random or pretrained");
  }
  c.weights = weights;
}

void read_weights(const json& j, LossWeights& w, const std::string& path) {
  Section s(j, path);
  s.get("alpha", w.alpha);
  s.get("beta", w.beta);
  s.get("gamma", w.gamma);
  s.finish();
}

void read_saliency(const json& j, SaliencyConfig& c, const std::string& path) {
  Section s(j, path);
  s.get("median_kernel", c.median_kernel);
  s.get("gaussian_kernel", c.gaussian_kernel);
  s.get("gaussian_sigma", c.gaussian_sigma);
  s.get("a", c.a);
  s.finish();
}

void read_train(const json& j, TrainConfig& c, const std::string& path) {
  Section s(j, path);
  std::string grad_mode = to_string(c.grad_mode);
  s.get("epochs", c.epochs);
  s.get("decay_start_epoch", c.decay_start_epoch);
  s.get("lr0", c.lr0);
  s.get("adam_beta1", c.adam_beta1);
  s.get("adam_beta2", c.adam_beta2);
  s.get("adam_eps", c.adam_eps);
  s.get("batch_size", c.batch_size);
  s.get("seed", c.seed);
  s.get("grad_mode", grad_mode);
  s.get("checkpoint_every", c.checkpoint_every);
  s.get("grad_clip", c.grad_clip);
  s.get("discriminator_lr_scale", c.discriminator_lr_scale);
  if (const json* w = s.sub("loss_weights")) read_weights(*w, c.loss_weights, s.qualified("loss_weights"));
  if (const json* sal = s.sub("saliency")) read_saliency(*sal, c.saliency, s.qualified("saliency"));
  s.finish();
  c.grad_mode = saliency_grad_mode_from_string(grad_mode);
}

void read_ssim(const json& j, SSIMParams& p, const std::string& path) {
  Section s(j, path);
  std::string mode = to_string(p.mode);
  s.get("c1", p.c1);
  s.get("c2", p.c2);
  s.get("mode", mode);
  s.get("window", p.window);
  s.get("sigma", p.sigma);
  s.finish();
  p.mode = ssim_mode_from_string(mode);
}

}  // namespace

json to_json(const GeneratorConfig& c) {
  return {{"in_channels", c.in_channels},         {"out_channels", c.out_channels},
          {"base_width", c.base_width},           {"n_residual_blocks", c.n_residual_blocks},
          {"downsample_steps", c.downsample_steps}, {"use_dropout", c.use_dropout},
          {"dropout_p", c.dropout_p}};
}

json to_json(const DiscriminatorConfig& c) {
  return {{"in_channels", c.in_channels}, {"kernel", c.kernel}, {"strides", c.strides},
          {"widths", c.widths},           {"leaky_slope", c.leaky_slope}};
}

json to_json(const FeatureExtractorConfig& c) {
  return {{"mode", c.mode == FeatureExtractorConfig::Mode::pretrained ? "pretrained" : "fixed-random"},
          {"seed", c.seed},
          {"weights", c.weights.string()},
          {"tap_pool", c.tap_pool},
          {"tap_conv", c.tap_conv},
          {"width_divisor", c.width_divisor}};
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"decay_start_epoch", c.decay_start_epoch},
          {"lr0", c.lr0},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"grad_mode", to_string(c.grad_mode)},
          {"checkpoint_every", c.checkpoint_every},
          {"grad_clip", c.grad_clip},
          {"discriminator_lr_scale", c.discriminator_lr_scale},
          {"loss_weights", {{"alpha", c.loss_weights.alpha}, {"beta", c.loss_weights.beta}, {"gamma", c.loss_weights.gamma}}},
          {"saliency",
           {{"median_kernel", c.saliency.median_kernel},
            {"gaussian_kernel", c.saliency.gaussian_kernel},
            {"gaussian_sigma", c.saliency.gaussian_sigma},
            {"a", c.saliency.a}}}};
}

json to_json(const RunConfig& c) {
  json train = to_json(c.train);
  json weights = train["loss_weights"];
  json saliency = train["saliency"];
  train.erase("loss_weights");
  train.erase("saliency");
  return {{"train", train},
          {"loss_weights", weights},
          {"saliency", saliency},
          {"generator", to_json(c.model.generator)},
          {"discriminator", to_json(c.model.discriminator)},
          {"feature_extractor", to_json(c.model.features)},
          {"ssim",
           {{"c1", c.ssim.c1}, {"c2", c.ssim.c2}, {"mode", to_string(c.ssim.mode)}, {"window", c.ssim.window},
            {"sigma", c.ssim.sigma}}}};
}

GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig c;
  read_generator(j, c, "generator");
  return c;
}

DiscriminatorConfig discriminator_config_from_json(const json& j) {
  DiscriminatorConfig c;
  read_discriminator(j, c, "discriminator");
  return c;
}

FeatureExtractorConfig feature_config_from_json(const json& j) {
  FeatureExtractorConfig c;
  read_features(j, c, "feature_extractor");
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  read_train(j, c, "train");
  return c;
}

RunConfig run_config_from_json(const json& j, RunConfig base) {
  Section s(j, "");
  if (const json* t = s.sub("train")) read_train(*t, base.train, "train");
  if (const json* w = s.sub("loss_weights")) read_weights(*w, base.train.loss_weights, "loss_weights");
  if (const json* sal = s.sub("saliency")) read_saliency(*sal, base.train.saliency, "saliency");
  if (const json* g = s.sub("generator")) read_generator(*g, base.model.generator, "generator");
  if (const json* d = s.sub("discriminator")) read_discriminator(*d, base.model.discriminator, "discriminator");
  if (const json* f = s.sub("feature_extractor")) read_features(*f, base.model.features, "feature_extractor");
  if (const json* p = s.sub("ssim")) read_ssim(*p, base.ssim, "ssim");
  s.finish();
  base.model.generator.validate();
  base.model.discriminator.validate();
  base.model.features.validate();
  base.train.validate();
  base.ssim.validate();
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ParameterError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace ffasynth
