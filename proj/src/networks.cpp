#include "ffasynth/networks.hpp"

#include <array>
#include <cmath>

#include "ffasynth/error.hpp"
#include "ffasynth/tensor_io.hpp"

namespace ffasynth {

namespace {

constexpr double kInitStddev = 0.02;
constexpr std::array<int, 5> kVggConvsPerBlock{2, 2, 4, 4, 4};
constexpr std::array<int, 5> kVggWidths{64, 128, 256, 512, 512};

std::string idx(const char* stem, int i) { return std::string(stem) + std::to_string(i); }

}  // namespace

// ---- configs --------------------------------------------------------------

void GeneratorConfig::validate() const {
  if (in_channels <= 0 || out_channels <= 0) throw ParameterError("generator channel counts must be positive");
  if (base_width <= 0) throw ParameterError("generator base_width must be positive");
  if (n_residual_blocks < 0 || downsample_steps < 0) {
    throw ParameterError("generator block/step counts must be non-negative");
  }
  if (use_dropout && !(dropout_p > 0.0 && dropout_p < 1.0)) {
    throw ParameterError("dropout probability must lie in (0,1)");
  }
}

void GeneratorConfig::check_input(int height, int width) const {
  const int m = 1 << downsample_steps;
  if (height % m != 0 || width % m != 0) {
    throw ParameterError("generator input " + std::to_string(width) + "x" + std::to_string(height) +
                         " is not divisible by " + std::to_string(m));
  }
}

DiscriminatorConfig DiscriminatorConfig::patch_gan(int base_width) {
  DiscriminatorConfig cfg;
  cfg.strides = {2, 2, 2, 1, 1};
  cfg.widths = {base_width, 2 * base_width, 4 * base_width, 8 * base_width, 1};
  return cfg;
}

DiscriminatorConfig DiscriminatorConfig::image_gan(int base_width) {
  DiscriminatorConfig cfg;
  cfg.strides = {2, 2, 2, 2, 2, 1, 1};
  cfg.widths = {base_width,     2 * base_width, 4 * base_width, 8 * base_width,
                8 * base_width, 8 * base_width, 1};
  return cfg;
}

void DiscriminatorConfig::validate() const {
  if (strides.empty() || strides.size() != widths.size()) {
    throw ParameterError("discriminator strides and widths must be non-empty and of equal length");
  }
  if (kernel != 4) throw ParameterError("discriminator kernel must be 4");
  if (in_channels <= 1) throw ParameterError("discriminator needs condition and candidate channels");
  for (std::size_t i = 0; i < strides.size(); ++i) {
    if (strides[i] < 1 || widths[i] < 1) throw ParameterError("discriminator strides and widths must be >= 1");
  }
  if (widths.back() != 1) throw ParameterError("discriminator must end in a single-channel map");
  if (!(leaky_slope >= 0.0)) throw ParameterError("leaky slope must be non-negative");
}

bool DiscriminatorConfig::is_patch_gan() const {
  return strides.size() == 5 && kernel == 4 && widths.back() == 1;
}

int receptive_field(const DiscriminatorConfig& cfg) {
  int r = 1;
  int jump = 1;
  for (int s : cfg.strides) {
    r += (cfg.kernel - 1) * jump;
    jump *= s;
  }
  return r;
}

std::pair<int, int> score_map_size(const DiscriminatorConfig& cfg, int height, int width) {
  for (int s : cfg.strides) {
    height = conv_out_size(height, cfg.kernel, s, 1);
    width = conv_out_size(width, cfg.kernel, s, 1);
  }
  return {height, width};
}

void FeatureExtractorConfig::validate() const {
  if (tap_pool < 1 || tap_pool > 5) throw ParameterError("feature tap pool index must be in 1..5");
  if (tap_conv < 1 || tap_conv > kVggConvsPerBlock[tap_pool - 1]) {
    throw ParameterError("feature tap conv index must be in 1.." +
                         std::to_string(kVggConvsPerBlock[tap_pool - 1]) + " for block " +
                         std::to_string(tap_pool));
  }
  if (width_divisor < 1) throw ParameterError("feature width divisor must be >= 1");
  if (mode == Mode::pretrained && weights.empty()) {
    throw ParameterError("pretrained feature extractor needs a weight file");
  }
}

// ---- Generator ------------------------------------------------------------

Generator::Generator(GeneratorConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  build(rng);
}

Generator::Generator(GeneratorConfig cfg, const GeneratorParams& params) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(0);
  build(rng);
  params_.assign_values(params);
}

void Generator::build(std::mt19937_64& rng) {
  auto& g = graph_;
  int w = cfg_.base_width;
  g.emplace<Conv2d>("g.stem.conv", ConvSpec{cfg_.in_channels, w, 7, 1, 3, Padding::reflect}, params_, rng, kInitStddev);
  g.emplace<InstanceNorm>("g.stem.norm");
  g.emplace<LeakyReLU>("g.stem.relu", 0.0);
  for (int i = 1; i <= cfg_.downsample_steps; ++i) {
    const std::string n = idx("g.down", i);
    g.emplace<Conv2d>(n + ".conv", ConvSpec{w, 2 * w, 3, 2, 1, Padding::zero}, params_, rng, kInitStddev);
    g.emplace<InstanceNorm>(n + ".norm");
    g.emplace<LeakyReLU>(n + ".relu", 0.0);
    w *= 2;
  }
  for (int b = 1; b <= cfg_.n_residual_blocks; ++b) {
    const std::string n = idx("g.res", b);
    Sequential body(n + ".body");
    body.emplace<Conv2d>(n + ".conv1", ConvSpec{w, w, 3, 1, 1, Padding::reflect}, params_, rng, kInitStddev);
    body.emplace<InstanceNorm>(n + ".norm1");
    body.emplace<LeakyReLU>(n + ".relu1", 0.0);
    if (cfg_.use_dropout) body.emplace<Dropout>(n + ".dropout", cfg_.dropout_p);
    body.emplace<Conv2d>(n + ".conv2", ConvSpec{w, w, 3, 1, 1, Padding::reflect}, params_, rng, kInitStddev);
    body.emplace<InstanceNorm>(n + ".norm2");
    body.emplace<LeakyReLU>(n + ".relu2", 0.0);
    g.emplace<Residual>(n, std::move(body));
  }
  for (int i = 1; i <= cfg_.downsample_steps; ++i) {
    const std::string n = idx("g.up", i);
    g.emplace<ConvTranspose2d>(n + ".deconv", w, w / 2 > 0 ? w / 2 : 1, 3, 2, 1, 1, params_, rng, kInitStddev);
    w = w / 2 > 0 ? w / 2 : 1;
    g.emplace<InstanceNorm>(n + ".norm");
    g.emplace<LeakyReLU>(n + ".relu", 0.0);
  }
  g.emplace<Conv2d>("g.head.conv", ConvSpec{w, cfg_.out_channels, 7, 1, 3, Padding::reflect}, params_, rng, kInitStddev);
  g.emplace<Tanh>("g.head.tanh");
  g.emplace<Affine>("g.head.remap", 0.5, 0.5);
}

Tensor Generator::forward(const Tensor& x, const ForwardContext& ctx) {
  if (x.shape().size() != 3 || x.channels() != cfg_.in_channels) {
    throw ParameterError("generator expects " + std::to_string(cfg_.in_channels) +
                         "-channel input, got " + x.shape_string());
  }
  cfg_.check_input(x.height(), x.width());
  return graph_.forward(x, params_, ctx);
}

Tensor Generator::backward(const Tensor& grad_out) { return graph_.backward(grad_out, params_, true); }

Image Generator::forward(const Image& img) { return to_image(forward(to_tensor(img))); }

// ---- Discriminator --------------------------------------------------------

Discriminator::Discriminator(DiscriminatorConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  build(rng);
}

Discriminator::Discriminator(DiscriminatorConfig cfg, const DiscriminatorParams& params)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(0);
  build(rng);
  params_.assign_values(params);
}

void Discriminator::build(std::mt19937_64& rng) {
  const std::size_t n = cfg_.strides.size();
  int in = cfg_.in_channels;
  for (std::size_t l = 0; l < n; ++l) {
    const std::string name = idx("d.conv", static_cast<int>(l + 1));
    graph_.emplace<Conv2d>(name, ConvSpec{in, cfg_.widths[l], cfg_.kernel, cfg_.strides[l], 1, Padding::zero},
                           params_, rng, kInitStddev);
    if (l + 1 < n) {
      if (l > 0) graph_.emplace<InstanceNorm>(name + ".norm");
      graph_.emplace<LeakyReLU>(name + ".lrelu", cfg_.leaky_slope);
    } else {
      graph_.emplace<Sigmoid>(name + ".sigmoid");
    }
    in = cfg_.widths[l];
  }
}

Tensor Discriminator::forward(const Tensor& condition, const Tensor& candidate) {
  if (condition.height() != candidate.height() || condition.width() != candidate.width()) {
    throw ParameterError("discriminator condition " + condition.shape_string() +
                         " and candidate " + candidate.shape_string() + " differ in extent");
  }
  if (condition.channels() + candidate.channels() != cfg_.in_channels) {
    throw ParameterError("discriminator expects " + std::to_string(cfg_.in_channels) +
                         " stacked channels, got " +
                         std::to_string(condition.channels() + candidate.channels()));
  }
  const auto [sh, sw] = score_map_size(cfg_, condition.height(), condition.width());
  if (sh <= 0 || sw <= 0) {
    throw ParameterError("input " + std::to_string(condition.width()) + "x" +
                         std::to_string(condition.height()) + " is too small for the discriminator");
  }
  condition_channels_ = condition.channels();
  return graph_.forward(concat_channels(condition, candidate), params_, {});
}

Tensor Discriminator::backward(const Tensor& grad_scores, bool accumulate) {
  const Tensor full = graph_.backward(grad_scores, params_, accumulate);
  const int cand = full.channels() - condition_channels_;
  Tensor out = Tensor::chw(cand, full.height(), full.width());
  std::copy(full.values().begin() + static_cast<std::ptrdiff_t>(condition_channels_ * full.plane()),
            full.values().end(), out.values().begin());
  return out;
}

// ---- FeatureExtractor -----------------------------------------------------

FeatureExtractor::FeatureExtractor(FeatureExtractorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  int in = 3;
  for (int b = 1; b <= cfg_.tap_pool; ++b) {
    const int width = std::max(1, kVggWidths[b - 1] / cfg_.width_divisor);
    const int convs = b < cfg_.tap_pool ? kVggConvsPerBlock[b - 1] : cfg_.tap_conv;
    for (int c = 1; c <= convs; ++c) {
      const std::string name = "vgg.conv" + std::to_string(b) + "_" + std::to_string(c);
      graph_.emplace<Conv2d>(name, ConvSpec{in, width, 3, 1, 1, Padding::zero}, params_, rng,
                             std::sqrt(2.0 / (in * 9.0)));
      graph_.emplace<LeakyReLU>(name + ".relu", 0.0);
      in = width;
    }
    if (b < cfg_.tap_pool) graph_.emplace<MaxPool2>("vgg.pool" + std::to_string(b));
  }
  if (cfg_.mode == FeatureExtractorConfig::Mode::pretrained) {
    if (!std::filesystem::exists(cfg_.weights)) {
      throw DataError("feature extractor weight file '" + cfg_.weights.string() + "' not found");
    }
    const TensorFile file = read_tensor_file(cfg_.weights);
    load_params(file, params_, "", cfg_.weights.string());
  }
}

Tensor FeatureExtractor::forward(const Tensor& x) {
  if (x.shape().size() != 3 || (x.channels() != 1 && x.channels() != 3)) {
    throw ParameterError("feature extractor expects a 1- or 3-channel input, got " + x.shape_string());
  }
  replicated_ = x.channels() == 1;
  if (!replicated_) return graph_.forward(x, params_, {});
  Tensor rgb = Tensor::chw(3, x.height(), x.width());
  for (int c = 0; c < 3; ++c)
    std::copy(x.values().begin(), x.values().end(),
              rgb.values().begin() + static_cast<std::ptrdiff_t>(c * x.plane()));
  return graph_.forward(rgb, params_, {});
}

Tensor FeatureExtractor::backward(const Tensor& grad_features) {
  const Tensor g = graph_.backward(grad_features, params_, false);
  if (!replicated_) return g;
  Tensor out = Tensor::chw(1, g.height(), g.width());
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < g.plane(); ++i) out[i] += g[c * g.plane() + i];
  return out;
}

Tensor FeatureExtractor::extract(const Image& img) { return forward(to_tensor(img)); }

// ---- free-function forms --------------------------------------------------

Image generator_forward(const GeneratorParams& params, const GeneratorConfig& cfg, const Image& img) {
  Generator g(cfg, params);
  return g.forward(img);
}

Tensor discriminator_forward(const DiscriminatorParams& params, const DiscriminatorConfig& cfg,
                             const Image& condition, const Image& candidate) {
  Discriminator d(cfg, params);
  return d.forward(to_tensor(condition), to_tensor(candidate));
}

Tensor feature_extract(FeatureExtractor& fx, const Image& img) { return fx.extract(img); }

}  // namespace ffasynth
