#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ffasynth/image.hpp"
#include "ffasynth/networks.hpp"
#include "ffasynth/saliency.hpp"
#include "ffasynth/tensor.hpp"

namespace ffasynth {

/// Coefficients of L = L_GAN + alpha·L_pixel + beta·L_perceptual + gamma·L_sal.
struct LossWeights {
  double alpha = 100.0;
  double beta = 0.001;
  double gamma = 1.0;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossReport {
  double gan = 0.0;
  double pixel = 0.0;
  double perceptual = 0.0;
  double saliency = 0.0;
  double total = 0.0;
};

/// How gradients cross the median-filter background of the generated image.
enum class SaliencyGradMode {
  detached_background,  ///< background is a constant of the forward pass
  exact_median,         ///< gradient routed to the selected median element
};

std::string to_string(SaliencyGradMode mode);
SaliencyGradMode saliency_grad_mode_from_string(const std::string& s);

inline constexpr double kLogClamp = 1e-12;

/// A scalar loss and its gradient w.r.t. the differentiated argument.
struct LossValue {
  double value = 0.0;
  Tensor grad;
};

/// mean(−log D(fake)), scores clamped to at least 1e-12.
double adversarial_g_loss(const Tensor& fake_scores);
LossValue adversarial_g_loss_grad(const Tensor& fake_scores);

/// mean(−log D(real)) + mean(−log(1 − D(fake))).
double adversarial_d_loss(const Tensor& real_scores, const Tensor& fake_scores);
/// Value with gradients w.r.t. the real and the fake scores.
struct DiscriminatorLoss {
  double value = 0.0;
  Tensor grad_real;
  Tensor grad_fake;
};
DiscriminatorLoss adversarial_d_loss_grad(const Tensor& real_scores, const Tensor& fake_scores);

/// (1/(W·H)) Σ |target − generated|, summed over channels.
double pixel_l1(const Image& generated, const Image& target);
LossValue pixel_l1_grad(const Tensor& generated, const Tensor& target);

/// (1/(W_f·H_f)) Σ (φ(target) − φ(generated))² at the extractor's tap.
double perceptual_loss(const Image& generated, const Image& target, FeatureExtractor& fx);
/// Gradient w.r.t. `generated` given precomputed target features.
LossValue perceptual_loss_grad(const Tensor& generated, const Tensor& target_features,
                               FeatureExtractor& fx);

/// Mean squared difference between the saliency map of `generated` and `target`.
double saliency_loss(const Image& generated, const SaliencyMap& target, const SaliencyConfig& cfg);

struct SaliencyLossValue {
  double value = 0.0;
  Tensor grad;
  std::vector<double> background;  ///< median background of `generated` used in the forward
};

/// Differentiable form on a (1,H,W) tensor. With `frozen_background`, that background
/// replaces the median of `generated` (used for finite differences of the detached
/// semantics).
SaliencyLossValue saliency_loss_grad(const Tensor& generated, const SaliencyMap& target,
                                     const SaliencyConfig& cfg, SaliencyGradMode mode,
                                     std::span<const double> frozen_background = {});

/// Combines the four terms. Throws NumericFault naming the first non-finite term.
LossReport total_loss(double gan, double pixel, double perceptual, double saliency,
                      const LossWeights& w);

}  // namespace ffasynth
