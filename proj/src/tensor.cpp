#include "ffasynth/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "ffasynth/error.hpp"

namespace ffasynth {

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (int d : shape_) {
    if (d <= 0) throw ParameterError("tensor dimensions must be positive, got " + shape_string());
    n *= static_cast<std::size_t>(d);
  }
  data_.assign(n, fill);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

Tensor& Tensor::operator+=(const Tensor& o) {
  if (!same_shape(o)) {
    throw ParameterError("tensor shape mismatch " + shape_string() + " vs " + o.shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor to_tensor(const Image& img) {
  Tensor t = Tensor::chw(img.channels(), img.height(), img.width());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) t.at(c, y, x) = img.at(x, y, c);
  return t;
}

Image to_image(const Tensor& t) {
  Image img(t.width(), t.height(), t.channels());
  for (int c = 0; c < t.channels(); ++c)
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x) img.at(x, y, c) = static_cast<float>(t.at(c, y, x));
  return img;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ParameterError("cannot concatenate " + a.shape_string() + " with " + b.shape_string());
  }
  Tensor out = Tensor::chw(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(),
            out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

std::size_t ParamSet::add(std::string name, Tensor value) {
  if (find(name) != size()) throw ParameterError("duplicate parameter name '" + name + "'");
  Tensor grad(value.shape(), 0.0);
  params_.push_back({std::move(name), std::move(value), std::move(grad)});
  return params_.size() - 1;
}

std::size_t ParamSet::find(const std::string& name) const {
  auto it = std::find_if(params_.begin(), params_.end(),
                         [&](const Param& p) { return p.name == name; });
  return static_cast<std::size_t>(it - params_.begin());
}

std::size_t ParamSet::count() const noexcept {
  return std::accumulate(params_.begin(), params_.end(), std::size_t{0},
                         [](std::size_t n, const Param& p) { return n + p.value.size(); });
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

bool ParamSet::all_finite() const noexcept {
  return std::all_of(params_.begin(), params_.end(),
                     [](const Param& p) { return p.value.all_finite(); });
}

void ParamSet::assign_values(const ParamSet& other) {
  if (other.size() != size()) {
    throw ParameterError("parameter count mismatch: expected " + std::to_string(size()) +
                         ", got " + std::to_string(other.size()));
  }
  for (std::size_t i = 0; i < size(); ++i) {
    const Param& src = other.params_[i];
    Param& dst = params_[i];
    if (src.name != dst.name || !src.value.same_shape(dst.value)) {
      throw ParameterError("parameter mismatch at '" + dst.name + "' " +
                           dst.value.shape_string() + ": got '" + src.name + "' " +
                           src.value.shape_string());
    }
    dst.value = src.value;
  }
}

}  // namespace ffasynth
