#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ffasynth/tensor.hpp"

namespace ffasynth {

struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;  ///< required only by dropout in training mode
};

/// A differentiable stage. `forward` caches what `backward` needs; `backward` must be
/// called after the matching `forward`, returns the input gradient and, when
/// `accumulate` is set, adds parameter gradients into `params`.
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) = 0;
  virtual Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

using LayerPtr = std::unique_ptr<Layer>;

enum class Padding { zero, reflect };

struct ConvSpec {
  int in = 1;
  int out = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 0;
  Padding padding = Padding::zero;
};

/// Output extent of a convolution along one axis.
constexpr int conv_out_size(int n, int kernel, int stride, int pad) {
  return (n + 2 * pad - kernel) / stride + 1;
}

/// Registers `name.weight` (out,in,k,k) drawn from N(0, stddev) and a zero `name.bias`.
class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, ConvSpec spec, ParamSet& params, std::mt19937_64& rng, double stddev);

  Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) override;
  LayerPtr clone() const override { return std::make_unique<Conv2d>(*this); }

  const ConvSpec& spec() const noexcept { return spec_; }
  std::size_t weight_index() const noexcept { return weight_; }
  std::size_t bias_index() const noexcept { return bias_; }

 private:
  ConvSpec spec_;
  std::size_t weight_ = 0;
  std::size_t bias_ = 0;
  Tensor padded_;
  int in_h_ = 0;
  int in_w_ = 0;
};

/// Strided transposed convolution (weight layout (in,out,k,k)); output extent
/// (n-1)·stride − 2·pad + kernel + output_pad.
class ConvTranspose2d final : public Layer {
 public:
  ConvTranspose2d(std::string name, int in, int out, int kernel, int stride, int pad,
                  int output_pad, ParamSet& params, std::mt19937_64& rng, double stddev);

  Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) override;
  LayerPtr clone() const override { return std::make_unique<ConvTranspose2d>(*this); }

 private:
  int in_, out_, kernel_, stride_, pad_, output_pad_;
  std::size_t weight_ = 0;
  std::size_t bias_ = 0;
  Tensor input_;
};

/// Per-channel normalization over the spatial extent, no affine parameters.
class InstanceNorm final : public Layer {
 public:
  explicit InstanceNorm(std::string name, double eps = 1e-5) : Layer(std::move(name)), eps_(eps) {}

  Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) override;
  LayerPtr clone() const override { return std::make_unique<InstanceNorm>(*this); }

 private:
  double eps_;
  Tensor normalized_;
  std::vector<double> inv_std_;
};

class LeakyReLU final : public Layer {
 public:
  LeakyReLU(std::string name, double slope) : Layer(std::move(name)), slope_(slope) {}

  Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) override;
  LayerPtr clone() const override { return std::make_unique<LeakyReLU>(*this); }

 private:
  double slope_;  ///< 0 gives a plain ReLU
  Tensor input_;
};

class Tanh final : public Layer {
 public:
  using Layer::Layer;
  Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) override;
  LayerPtr clone() const override { return std::make_unique<Tanh>(*this); }

 private:
  Tensor output_;
};

class Sigmoid final : public Layer {
 public:
  using Layer::Layer;
  Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) override;
  LayerPtr clone() const override { return std::make_unique<Sigmoid>(*this); }

 private:
  Tensor output_;
};

/// y = scale·x + shift
class Affine final : public Layer {
 public:
  Affine(std::string name, double scale, double shift)
      : Layer(std::move(name)), scale_(scale), shift_(shift) {}
  Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) override;
  LayerPtr clone() const override { return std::make_unique<Affine>(*this); }

 private:
  double scale_, shift_;
};

/// Inverted dropout; identity outside training.
class Dropout final : public Layer {
 public:
  Dropout(std::string name, double p) : Layer(std::move(name)), p_(p) {}
  Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) override;
  LayerPtr clone() const override { return std::make_unique<Dropout>(*this); }

 private:
  double p_;
  std::vector<double> mask_;
};

/// 2×2 max pooling, stride 2 (odd trailing rows/columns dropped).
class MaxPool2 final : public Layer {
 public:
  using Layer::Layer;
  Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) override;
  LayerPtr clone() const override { return std::make_unique<MaxPool2>(*this); }

 private:
  std::vector<std::size_t> argmax_;
  std::vector<int> in_shape_;
};

/// Ordered chain of layers. Every intermediate activation is checked for finiteness and
/// a NumericFault names the first layer that produced a non-finite value.
class Sequential final : public Layer {
 public:
  explicit Sequential(std::string name) : Layer(std::move(name)) {}
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void push(LayerPtr layer) { layers_.push_back(std::move(layer)); }

  std::size_t size() const noexcept { return layers_.size(); }
  Layer& operator[](std::size_t i) { return *layers_[i]; }

  Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) override;
  LayerPtr clone() const override { return std::make_unique<Sequential>(*this); }

 private:
  std::vector<LayerPtr> layers_;
};

/// y = x + body(x)
class Residual final : public Layer {
 public:
  Residual(std::string name, Sequential body) : Layer(std::move(name)), body_(std::move(body)) {}
  Tensor forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out, ParamSet& params, bool accumulate) override;
  LayerPtr clone() const override { return std::make_unique<Residual>(*this); }

 private:
  Sequential body_;
};

}  // namespace ffasynth
