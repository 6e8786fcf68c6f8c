#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ffasynth/image.hpp"
#include "ffasynth/layers.hpp"
#include "ffasynth/tensor.hpp"

namespace ffasynth {

using GeneratorParams = ParamSet;
using DiscriminatorParams = ParamSet;

/// ResNet-style encoder / residual core / decoder.
struct GeneratorConfig {
  int in_channels = 3;
  int out_channels = 1;
  int base_width = 64;
  int n_residual_blocks = 9;
  int downsample_steps = 2;
  bool use_dropout = false;
  double dropout_p = 0.5;

  void validate() const;
  /// Throws ParameterError unless both extents are multiples of 2^downsample_steps.
  void check_input(int height, int width) const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Stack of kernel-4 convolutions with zero padding 1. The default is the 5-layer
/// PatchGAN: leaky ReLU (0.2) after every layer but the last, instance norm on the
/// inner layers, sigmoid on the one-channel output.
struct DiscriminatorConfig {
  int in_channels = 4;  ///< condition (3) + candidate (1)
  int kernel = 4;
  std::vector<int> strides{2, 2, 2, 1, 1};
  std::vector<int> widths{64, 128, 256, 512, 1};
  double leaky_slope = 0.2;

  /// Five-layer PatchGAN (70-pixel receptive field).
  static DiscriminatorConfig patch_gan(int base_width = 64);
  /// Seven-layer discriminator whose receptive field (286 px) covers a whole 256² input,
  /// used as the "regular discriminator" ablation.
  static DiscriminatorConfig image_gan(int base_width = 64);

  void validate() const;
  bool is_patch_gan() const;

  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

/// Receptive field of one output score: r += (k-1)·jump, jump *= stride, per layer.
int receptive_field(const DiscriminatorConfig& cfg);

/// Score-map extent for a square or rectangular input (height, width).
std::pair<int, int> score_map_size(const DiscriminatorConfig& cfg, int height, int width);

class Generator {
 public:
  Generator(GeneratorConfig cfg, std::uint64_t seed);
  Generator(GeneratorConfig cfg, const GeneratorParams& params);

  const GeneratorConfig& config() const noexcept { return cfg_; }
  GeneratorParams& params() noexcept { return params_; }
  const GeneratorParams& params() const noexcept { return params_; }

  /// CHW input with in_channels → CHW output in [0,1] with out_channels.
  Tensor forward(const Tensor& x, const ForwardContext& ctx = {});
  /// Gradient w.r.t. the input; parameter gradients are accumulated into params().
  Tensor backward(const Tensor& grad_out);

  Image forward(const Image& img);

 private:
  void build(std::mt19937_64& rng);

  GeneratorConfig cfg_;
  GeneratorParams params_;
  Sequential graph_{"generator"};
};

class Discriminator {
 public:
  Discriminator(DiscriminatorConfig cfg, std::uint64_t seed);
  Discriminator(DiscriminatorConfig cfg, const DiscriminatorParams& params);

  const DiscriminatorConfig& config() const noexcept { return cfg_; }
  DiscriminatorParams& params() noexcept { return params_; }
  const DiscriminatorParams& params() const noexcept { return params_; }

  /// Per-patch probabilities (1, h', w') for the channel-concatenated pair.
  Tensor forward(const Tensor& condition, const Tensor& candidate);
  /// Gradient w.r.t. the candidate; parameter gradients accumulate only if `accumulate`.
  Tensor backward(const Tensor& grad_scores, bool accumulate = true);

 private:
  void build(std::mt19937_64& rng);

  DiscriminatorConfig cfg_;
  DiscriminatorParams params_;
  Sequential graph_{"discriminator"};
  int condition_channels_ = 0;
};

/// Frozen VGG19-style convolution stack used for the perceptual loss.
struct FeatureExtractorConfig {
  enum class Mode { fixed_random, pretrained };
  Mode mode = Mode::fixed_random;
  std::uint64_t seed = 0;
  std::filesystem::path weights;  ///< tensor file for pretrained mode
  int tap_pool = 3;               ///< i: features taken before the i-th max-pool
  int tap_conv = 3;               ///< j: after the j-th convolution (+ReLU) of that block
  int width_divisor = 1;          ///< 1 gives the VGG19 widths 64-128-256-512-512

  void validate() const;

  friend bool operator==(const FeatureExtractorConfig&, const FeatureExtractorConfig&) = default;
};

class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureExtractorConfig cfg);

  const FeatureExtractorConfig& config() const noexcept { return cfg_; }
  const ParamSet& params() const noexcept { return params_; }

  /// Features of a 1- or 3-channel CHW tensor (gray is replicated to three channels).
  Tensor forward(const Tensor& x);
  /// Input gradient for the most recent forward; weights never receive gradients.
  Tensor backward(const Tensor& grad_features);

  Tensor extract(const Image& img);

 private:
  FeatureExtractorConfig cfg_;
  ParamSet params_;
  Sequential graph_{"features"};
  bool replicated_ = false;
};

/// Convenience forms of the forward passes that take explicit parameter sets.
Image generator_forward(const GeneratorParams& params, const GeneratorConfig& cfg, const Image& img);
Tensor discriminator_forward(const DiscriminatorParams& params, const DiscriminatorConfig& cfg,
                             const Image& condition, const Image& candidate);
Tensor feature_extract(FeatureExtractor& fx, const Image& img);

}  // namespace ffasynth
