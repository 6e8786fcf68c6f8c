#include "ffasynth/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ffasynth/error.hpp"
#include "ffasynth/filters.hpp"

namespace ffasynth {

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) {
    throw ParameterError("loss weights must be non-negative");
  }
}

std::string to_string(SaliencyGradMode mode) {
  return mode == SaliencyGradMode::detached_background ? "detached-background"
                                                       : "exact-median-subgradient";
}

SaliencyGradMode saliency_grad_mode_from_string(const std::string& s) {
  if (s == "detached-background") return SaliencyGradMode::detached_background;
  if (s == "exact-median-subgradient") return SaliencyGradMode::exact_median;
  throw ParameterError("unknown saliency gradient mode '" + s + "'");
}

namespace {

double neg_log(double p) { return -std::log(std::max(p, kLogClamp)); }

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ParameterError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

void require_same(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ParameterError(std::string(what) + ": shape mismatch " + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + "x" + std::to_string(a.channels()) + " vs " +
                         std::to_string(b.width()) + "x" + std::to_string(b.height()) + "x" +
                         std::to_string(b.channels()));
  }
}

}  // namespace

double adversarial_g_loss(const Tensor& fake_scores) { return adversarial_g_loss_grad(fake_scores).value; }

LossValue adversarial_g_loss_grad(const Tensor& fake_scores) {
  const double n = static_cast<double>(fake_scores.size());
  LossValue out{0.0, Tensor(fake_scores.shape(), 0.0)};
  for (std::size_t i = 0; i < fake_scores.size(); ++i) {
    const double s = fake_scores[i];
    out.value += neg_log(s);
    out.grad[i] = s > kLogClamp ? -1.0 / (s * n) : 0.0;
  }
  out.value /= n;
  return out;
}

double adversarial_d_loss(const Tensor& real_scores, const Tensor& fake_scores) {
  return adversarial_d_loss_grad(real_scores, fake_scores).value;
}

DiscriminatorLoss adversarial_d_loss_grad(const Tensor& real_scores, const Tensor& fake_scores) {
  DiscriminatorLoss out{0.0, Tensor(real_scores.shape(), 0.0), Tensor(fake_scores.shape(), 0.0)};
  const double nr = static_cast<double>(real_scores.size());
  const double nf = static_cast<double>(fake_scores.size());
  double real_term = 0.0;
  for (std::size_t i = 0; i < real_scores.size(); ++i) {
    const double s = real_scores[i];
    real_term += neg_log(s);
    out.grad_real[i] = s > kLogClamp ? -1.0 / (s * nr) : 0.0;
  }
  double fake_term = 0.0;
  for (std::size_t i = 0; i < fake_scores.size(); ++i) {
    const double q = 1.0 - fake_scores[i];
    fake_term += neg_log(q);
    out.grad_fake[i] = q > kLogClamp ? 1.0 / (q * nf) : 0.0;
  }
  out.value = real_term / nr + fake_term / nf;
  return out;
}

double pixel_l1(const Image& generated, const Image& target) {
  require_same(generated, target, "pixel_l1");
  double s = 0.0;
  auto g = generated.data();
  auto t = target.data();
  for (std::size_t i = 0; i < g.size(); ++i) s += std::abs(static_cast<double>(t[i]) - g[i]);
  return s / (static_cast<double>(generated.width()) * generated.height());
}

LossValue pixel_l1_grad(const Tensor& generated, const Tensor& target) {
  require_same(generated, target, "pixel_l1");
  const double n = static_cast<double>(generated.plane());
  LossValue out{0.0, Tensor(generated.shape(), 0.0)};
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const double d = generated[i] - target[i];
    out.value += std::abs(d);
    out.grad[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
  }
  out.value /= n;
  return out;
}

double perceptual_loss(const Image& generated, const Image& target, FeatureExtractor& fx) {
  require_same(generated, target, "perceptual_loss");
  const Tensor ft = fx.extract(target);
  const Tensor fg = fx.extract(generated);
  double s = 0.0;
  for (std::size_t i = 0; i < ft.size(); ++i) s += (ft[i] - fg[i]) * (ft[i] - fg[i]);
  return s / static_cast<double>(ft.plane());
}

LossValue perceptual_loss_grad(const Tensor& generated, const Tensor& target_features,
                               FeatureExtractor& fx) {
  const Tensor fg = fx.forward(generated);
  require_same(fg, target_features, "perceptual_loss");
  const double n = static_cast<double>(fg.plane());
  Tensor grad_features(fg.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < fg.size(); ++i) {
    const double d = fg[i] - target_features[i];
    s += d * d;
    grad_features[i] = 2.0 * d / n;
  }
  return {s / n, fx.backward(grad_features)};
}

double saliency_loss(const Image& generated, const SaliencyMap& target, const SaliencyConfig& cfg) {
  if (generated.width() != target.width || generated.height() != target.height) {
    throw ParameterError("saliency_loss: generated image and target map differ in extent");
  }
  const SaliencyMap own = compute_saliency(generated, cfg);
  double s = 0.0;
  for (std::size_t i = 0; i < own.data.size(); ++i) {
    const double d = static_cast<double>(own.data[i]) - target.data[i];
    s += d * d;
  }
  return s / static_cast<double>(own.data.size());
}

SaliencyLossValue saliency_loss_grad(const Tensor& generated, const SaliencyMap& target,
                                     const SaliencyConfig& cfg, SaliencyGradMode mode,
                                     std::span<const double> frozen_background) {
  cfg.validate();
  if (generated.shape().size() != 3 || generated.channels() != 1) {
    throw ParameterError("saliency_loss expects a single-channel generated image");
  }
  const int w = generated.width();
  const int h = generated.height();
  if (w != target.width || h != target.height) {
    throw ParameterError("saliency_loss: generated image and target map differ in extent");
  }
  const std::size_t n = generated.size();
  const auto taps = gaussian_kernel(cfg.gaussian_kernel, cfg.gaussian_sigma);
  std::vector<double> smooth(n);
  plane::gaussian(generated.values(), w, h, taps, smooth);

  SaliencyLossValue out;
  if (!frozen_background.empty()) {
    if (frozen_background.size() != n) throw ParameterError("frozen background has the wrong size");
    out.background.assign(frozen_background.begin(), frozen_background.end());
  } else {
    out.background.resize(n);
    plane::median_q8(generated.values(), w, h, cfg.median_kernel, out.background);
  }

  std::vector<double> grad_sal(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = cfg.a * (smooth[i] - out.background[i]) - target.data[i];
    out.value += d * d;
    grad_sal[i] = 2.0 * d / static_cast<double>(n);
  }
  out.value /= static_cast<double>(n);

  out.grad = Tensor(generated.shape(), 0.0);
  std::vector<double> grad_smooth(n);
  for (std::size_t i = 0; i < n; ++i) grad_smooth[i] = cfg.a * grad_sal[i];
  plane::gaussian_adjoint(grad_smooth, w, h, taps, out.grad.values());
  if (mode == SaliencyGradMode::exact_median && frozen_background.empty()) {
    const auto sel = plane::median_q8_argsel(generated.values(), w, h, cfg.median_kernel);
    for (std::size_t i = 0; i < n; ++i) out.grad[static_cast<std::size_t>(sel[i])] -= cfg.a * grad_sal[i];
  }
  return out;
}

LossReport total_loss(double gan, double pixel, double perceptual, double saliency,
                      const LossWeights& w) {
  const std::pair<const char*, double> terms[] = {
      {"gan", gan}, {"pixel", pixel}, {"perceptual", perceptual}, {"saliency", saliency}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) throw NumericFault(name, std::string("loss term '") + name + "' is not finite");
  }
  LossReport r{gan, pixel, perceptual, saliency, 0.0};
  r.total = gan + w.alpha * pixel + w.beta * perceptual + w.gamma * saliency;
  return r;
}

}  // namespace ffasynth
