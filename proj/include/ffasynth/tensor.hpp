#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ffasynth/image.hpp"

namespace ffasynth {

/// Dense double tensor. Activations use (channels, height, width) layout; parameters
/// keep their natural shape in `shape`.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);

  static Tensor chw(int c, int h, int w, double fill = 0.0) { return Tensor({c, h, w}, fill); }

  const std::vector<int>& shape() const noexcept { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }

  /// Activation accessors (rank-3 tensors only).
  int channels() const { return shape_.at(0); }
  int height() const { return shape_.at(1); }
  int width() const { return shape_.at(2); }
  std::size_t plane() const { return static_cast<std::size_t>(height()) * width(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& at(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double at(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double v);
  bool all_finite() const noexcept;
  bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }
  std::string shape_string() const;

  Tensor& operator+=(const Tensor& o);
  Tensor& operator*=(double s);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

/// Image (channel-last float) to CHW tensor and back.
Tensor to_tensor(const Image& img);
Image to_image(const Tensor& t);

/// Concatenates two CHW tensors along channels.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Named learnable tensor with its accumulated gradient.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Ordered parameter collection; iteration order is registration order.
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const noexcept { return params_.size(); }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

  /// Index of `name`, or size() when absent.
  std::size_t find(const std::string& name) const;
  std::size_t count() const noexcept;  ///< total scalar count

  void zero_grad();
  bool all_finite() const noexcept;

  /// Copies values from `other`, which must hold the same names and shapes in the same
  /// order. Throws ParameterError naming the first mismatch.
  void assign_values(const ParamSet& other);

 private:
  std::vector<Param> params_;
};

}  // namespace ffasynth
