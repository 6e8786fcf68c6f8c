#pragma once

#include <filesystem>

#include <json.hpp>

#include "ffasynth/metrics.hpp"
#include "ffasynth/trainer.hpp"

namespace ffasynth {

/// Everything a training run is configured by. Serialized as JSON with the sections
/// "train", "loss_weights", "saliency", "generator", "discriminator",
/// "feature_extractor" and "ssim"; every key is optional and unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SSIMParams ssim;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

nlohmann::json to_json(const GeneratorConfig& c);
nlohmann::json to_json(const DiscriminatorConfig& c);
nlohmann::json to_json(const FeatureExtractorConfig& c);
nlohmann::json to_json(const TrainConfig& c);  ///< includes loss_weights and saliency
nlohmann::json to_json(const RunConfig& c);

GeneratorConfig generator_config_from_json(const nlohmann::json& j);
DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j);
FeatureExtractorConfig feature_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Starts from `base` and overrides the keys present in `j`. Throws ParameterError
/// naming the first unknown key ("section.key") or ill-typed value.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ffasynth
