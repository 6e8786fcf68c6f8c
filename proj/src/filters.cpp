#include "ffasynth/filters.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "ffasynth/error.hpp"

namespace ffasynth {

namespace {

constexpr int kBins = 256;

void check_odd(int k, const char* what) {
  if (k < 1 || k % 2 == 0) {
    throw ParameterError(std::string(what) + " kernel size must be odd and >= 1, got " +
                         std::to_string(k));
  }
}

void check_median_extent(int k, int w, int h) {
  check_odd(k, "median");
  if (k > 2 * std::min(w, h) - 1) {
    throw ParameterError("median kernel " + std::to_string(k) + " exceeds 2*min(W,H)-1 for a " +
                         std::to_string(w) + "x" + std::to_string(h) + " image");
  }
}

std::uint8_t quantize8d(double v) noexcept {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lrint(v * 255.0));
}

// Sliding-histogram median over a reflect-padded 8-bit plane. `quant(i)` yields the
// quantized value of source pixel i. Output holds the median bin per pixel.
template <typename Quant>
std::vector<std::uint8_t> median_bins(int w, int h, int k, Quant quant) {
  const int r = k / 2;
  const int pw = w + 2 * r;
  const int ph = h + 2 * r;
  std::vector<std::uint8_t> padded(static_cast<std::size_t>(pw) * ph);
  for (int y = 0; y < ph; ++y) {
    const int sy = reflect_index(y - r, h);
    for (int x = 0; x < pw; ++x) {
      padded[static_cast<std::size_t>(y) * pw + x] =
          quant(static_cast<std::size_t>(sy) * w + reflect_index(x - r, w));
    }
  }

  std::vector<std::int32_t> columns(static_cast<std::size_t>(pw) * kBins, 0);
  auto col = [&](int x) { return columns.data() + static_cast<std::size_t>(x) * kBins; };
  auto add_row = [&](int y, int delta) {
    const std::uint8_t* row = padded.data() + static_cast<std::size_t>(y) * pw;
    for (int x = 0; x < pw; ++x) col(x)[row[x]] += delta;
  };
  for (int y = 0; y < 2 * r; ++y) add_row(y, +1);

  const int rank = (k * k + 1) / 2;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h);
  std::array<std::int32_t, kBins> kernel{};
  for (int y = 0; y < h; ++y) {
    add_row(y + 2 * r, +1);
    kernel.fill(0);
    for (int x = 0; x < k; ++x) {
      const std::int32_t* c = col(x);
      for (int b = 0; b < kBins; ++b) kernel[b] += c[b];
    }
    for (int x = 0; x < w; ++x) {
      if (x > 0) {
        const std::int32_t* in = col(x + 2 * r);
        const std::int32_t* gone = col(x - 1);
        for (int b = 0; b < kBins; ++b) kernel[b] += in[b] - gone[b];
      }
      int acc = 0;
      int b = 0;
      for (; b < kBins; ++b) {
        acc += kernel[b];
        if (acc >= rank) break;
      }
      out[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(b);
    }
    add_row(y, -1);
  }
  return out;
}

void separable_pass(std::span<const double> in, int w, int h, std::span<const double> taps,
                    bool horizontal, std::span<double> out) {
  const int r = static_cast<int>(taps.size()) / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int j = -r; j <= r; ++j) {
        const std::size_t src = horizontal
                                    ? static_cast<std::size_t>(y) * w + reflect_index(x + j, w)
                                    : static_cast<std::size_t>(reflect_index(y + j, h)) * w + x;
        s += taps[j + r] * in[src];
      }
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
}

void separable_pass_adjoint(std::span<const double> grad_out, int w, int h,
                            std::span<const double> taps, bool horizontal,
                            std::span<double> grad_in) {
  const int r = static_cast<int>(taps.size()) / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = grad_out[static_cast<std::size_t>(y) * w + x];
      for (int j = -r; j <= r; ++j) {
        const std::size_t src = horizontal
                                    ? static_cast<std::size_t>(y) * w + reflect_index(x + j, w)
                                    : static_cast<std::size_t>(reflect_index(y + j, h)) * w + x;
        grad_in[src] += taps[j + r] * g;
      }
    }
  }
}

}  // namespace

void FilterSpec::validate() const {
  check_odd(kernel_size, kind == Kind::median ? "median" : "gaussian");
  if (kind == Kind::gaussian && !(sigma > 0.0)) {
    throw ParameterError("gaussian sigma must be > 0, got " + std::to_string(sigma));
  }
}

std::vector<double> gaussian_kernel(int k, double sigma) {
  FilterSpec{FilterSpec::Kind::gaussian, k, sigma}.validate();
  const int r = k / 2;
  std::vector<double> taps(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    taps[i + r] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    sum += taps[i + r];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

Image median_filter(const Image& img, int k) {
  if (img.channels() != 1) {
    throw ParameterError("median_filter expects a single-channel image, got " +
                         std::to_string(img.channels()) + " channels");
  }
  check_median_extent(k, img.width(), img.height());
  auto src = img.data();
  auto bins = median_bins(img.width(), img.height(), k,
                          [&](std::size_t i) { return quantize8(src[i]); });
  Image out(img.width(), img.height(), 1);
  auto dst = out.data();
  for (std::size_t i = 0; i < bins.size(); ++i) dst[i] = static_cast<float>(bins[i]) / 255.0f;
  return out;
}

Image gaussian_filter(const Image& img, int k, double sigma) {
  const auto taps = gaussian_kernel(k, sigma);
  const int w = img.width();
  const int h = img.height();
  const int c = img.channels();
  Image out(w, h, c);
  std::vector<double> in_plane(static_cast<std::size_t>(w) * h);
  std::vector<double> out_plane(in_plane.size());
  auto src = img.data();
  auto dst = out.data();
  for (int ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < in_plane.size(); ++i) in_plane[i] = src[i * c + ch];
    plane::gaussian(in_plane, w, h, taps, out_plane);
    for (std::size_t i = 0; i < out_plane.size(); ++i)
      dst[i * c + ch] = static_cast<float>(out_plane[i]);
  }
  return out;
}

Image apply_filter(const Image& img, const FilterSpec& spec) {
  spec.validate();
  if (spec.kind == FilterSpec::Kind::median) return median_filter(img, spec.kernel_size);
  return gaussian_filter(img, spec.kernel_size, spec.sigma);
}

Image circular_roi_mask(int size) { return circular_roi_mask(size, size); }

Image circular_roi_mask(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw ParameterError("ROI mask size must be positive");
  }
  Image mask(width, height, 1);
  const double cx = width / 2.0;
  const double cy = height / 2.0;
  const double radius = width / 2.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      mask.at(x, y) = dx * dx + dy * dy <= radius * radius ? 1.0f : 0.0f;
    }
  }
  return mask;
}

Image apply_mask(const Image& img, const Image& mask) {
  if (mask.channels() != 1) throw ParameterError("mask must be single-channel");
  if (mask.width() != img.width() || mask.height() != img.height()) {
    throw ParameterError("mask extent " + std::to_string(mask.width()) + "x" +
                         std::to_string(mask.height()) + " does not match image " +
                         std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
  Image out = img;
  auto dst = out.data();
  auto m = mask.data();
  const int c = img.channels();
  for (std::size_t i = 0; i < m.size(); ++i)
    for (int ch = 0; ch < c; ++ch) dst[i * c + ch] *= m[i];
  return out;
}

std::vector<PatchOrigin> patch_grid(int width, int height, int patch_w, int patch_h,
                                    int stride_x, int stride_y) {
  if (patch_w <= 0 || patch_h <= 0) throw ParameterError("patch size must be positive");
  if (stride_x < 1 || stride_y < 1) throw ParameterError("patch stride must be >= 1");
  if (patch_w > width || patch_h > height) {
    throw ParameterError("patch " + std::to_string(patch_w) + "x" + std::to_string(patch_h) +
                         " exceeds image extent " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
  std::vector<PatchOrigin> origins;
  for (int y = 0; y + patch_h <= height; y += stride_y)
    for (int x = 0; x + patch_w <= width; x += stride_x) origins.push_back({x, y});
  return origins;
}

Image crop(const Image& img, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || x + w > img.width() || y + h > img.height()) {
    throw ParameterError("crop window outside image");
  }
  Image out(w, h, img.channels());
  const std::size_t row = static_cast<std::size_t>(w) * img.channels();
  auto src = img.data();
  auto dst = out.data();
  for (int r = 0; r < h; ++r) {
    const std::size_t off = (static_cast<std::size_t>(y + r) * img.width() + x) * img.channels();
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(off), row,
                dst.begin() + static_cast<std::ptrdiff_t>(r * row));
  }
  return out;
}

std::vector<Patch> extract_patches(const Image& img, int patch, int stride) {
  return extract_patches(img, patch, patch, stride, stride);
}

std::vector<Patch> extract_patches(const Image& img, int patch_w, int patch_h, int stride_x,
                                   int stride_y) {
  std::vector<Patch> patches;
  for (const auto& o : patch_grid(img.width(), img.height(), patch_w, patch_h, stride_x, stride_y))
    patches.push_back({crop(img, o.x, o.y, patch_w, patch_h), o});
  return patches;
}

Image reassemble(std::span<const Patch> patches, int width, int height, int channels) {
  Image out(width, height, channels);
  for (const auto& p : patches) {
    if (p.image.channels() != channels) throw ParameterError("patch channel mismatch");
    for (int y = 0; y < p.image.height(); ++y)
      for (int x = 0; x < p.image.width(); ++x)
        for (int c = 0; c < channels; ++c)
          out.at(p.origin.x + x, p.origin.y + y, c) = p.image.at(x, y, c);
  }
  return out;
}

namespace plane {

void gaussian(std::span<const double> in, int w, int h, std::span<const double> taps,
              std::span<double> out) {
  std::vector<double> tmp(in.size());
  separable_pass(in, w, h, taps, true, tmp);
  separable_pass(tmp, w, h, taps, false, out);
}

void gaussian_adjoint(std::span<const double> grad_out, int w, int h,
                      std::span<const double> taps, std::span<double> grad_in) {
  std::vector<double> tmp(grad_out.size(), 0.0);
  separable_pass_adjoint(grad_out, w, h, taps, false, tmp);
  separable_pass_adjoint(tmp, w, h, taps, true, grad_in);
}

void median_q8(std::span<const double> in, int w, int h, int k, std::span<double> out) {
  check_median_extent(k, w, h);
  auto bins = median_bins(w, h, k, [&](std::size_t i) { return quantize8d(in[i]); });
  for (std::size_t i = 0; i < bins.size(); ++i) out[i] = bins[i] / 255.0;
}

std::vector<int> median_q8_argsel(std::span<const double> in, int w, int h, int k) {
  check_median_extent(k, w, h);
  auto bins = median_bins(w, h, k, [&](std::size_t i) { return quantize8d(in[i]); });
  const int r = k / 2;
  std::vector<int> sel(bins.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t m = bins[static_cast<std::size_t>(y) * w + x];
      int best = w * h;
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = reflect_index(y + dy, h);
        for (int dx = -r; dx <= r; ++dx) {
          const int idx = sy * w + reflect_index(x + dx, w);
          if (idx < best && quantize8d(in[idx]) == m) best = idx;
        }
      }
      sel[static_cast<std::size_t>(y) * w + x] = best;
    }
  }
  return sel;
}

}  // namespace plane

}  // namespace ffasynth
