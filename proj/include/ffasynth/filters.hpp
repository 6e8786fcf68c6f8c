#pragma once

#include <span>
#include <vector>

#include "ffasynth/image.hpp"

namespace ffasynth {

/// Filter description. Border handling is always mirror reflection without edge
/// repetition (index -1 maps to 1).
struct FilterSpec {
  enum class Kind { median, gaussian };
  Kind kind = Kind::gaussian;
  int kernel_size = 7;
  double sigma = 1.5;

  /// Throws ParameterError on an even or non-positive kernel, or a non-positive sigma
  /// for a Gaussian.
  void validate() const;
};

/// Mirror-reflects any index into [0, n) with period 2(n-1).
constexpr int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Median of every k×k reflect-padded neighborhood of a single-channel image.
///
/// Inputs are quantized to 8 bits (the same rounding as save_png) and the median is
/// found with sliding column histograms, so the cost per pixel does not depend on k.
/// Requires odd k with k <= 2·min(W,H) - 1.
Image median_filter(const Image& img, int k);

/// Separable Gaussian smoothing with a normalized k-tap kernel, per channel.
Image gaussian_filter(const Image& img, int k, double sigma);

/// Applies the filter described by `spec`.
Image apply_filter(const Image& img, const FilterSpec& spec);

/// Normalized 1-D Gaussian taps, centered, length k.
std::vector<double> gaussian_kernel(int k, double sigma);

/// Single-channel mask: 1 where the pixel center lies in or on the circle of diameter
/// `size` centered in the image, 0 elsewhere.
Image circular_roi_mask(int size);

/// Rectangular variant: circle diameter equals `width`, centered in the rectangle.
Image circular_roi_mask(int width, int height);

/// Per-pixel, per-channel product with a single-channel mask of the same extent.
Image apply_mask(const Image& img, const Image& mask);

struct PatchOrigin {
  int x = 0;
  int y = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

struct Patch {
  Image image;
  PatchOrigin origin;
};

/// Top-left origins of every patch on the stride grid that fits inside a
/// width×height image, row-major.
std::vector<PatchOrigin> patch_grid(int width, int height, int patch_w, int patch_h,
                                    int stride_x, int stride_y);

Image crop(const Image& img, int x, int y, int w, int h);

std::vector<Patch> extract_patches(const Image& img, int patch, int stride);
std::vector<Patch> extract_patches(const Image& img, int patch_w, int patch_h, int stride_x,
                                   int stride_y);

/// Writes patches back into a zero image of the given size; later patches overwrite
/// earlier ones where they overlap.
Image reassemble(std::span<const Patch> patches, int width, int height, int channels);

// Double-precision plane kernels shared with the differentiable saliency path.
namespace plane {

/// out = separable Gaussian of `in` (w×h, row-major) with reflect padding.
void gaussian(std::span<const double> in, int w, int h, std::span<const double> taps,
              std::span<double> out);

/// Adjoint of `gaussian` for the same taps and extent: accumulates into `grad_in`.
void gaussian_adjoint(std::span<const double> grad_out, int w, int h,
                      std::span<const double> taps, std::span<double> grad_in);

/// 8-bit-quantized median of `in` with the histogram method; output values are q/255.
void median_q8(std::span<const double> in, int w, int h, int k, std::span<double> out);

/// For every output pixel, the source index holding the median value (ties resolve to
/// the lowest row-major source index). Brute-force cost; used only for exact gradients.
std::vector<int> median_q8_argsel(std::span<const double> in, int w, int h, int k);

}  // namespace plane

}  // namespace ffasynth
