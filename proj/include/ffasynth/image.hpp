#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace ffasynth {

/// Float raster, row-major, channel-last. Values are nominally in [0,1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f);
  Image(int width, int height, int channels, std::vector<float> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int x, int y, int c = 0) noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int x, int y, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Mean over channels; single-channel input is returned unchanged.
Image to_gray(const Image& img);

/// Copies channel `c` into a single-channel image.
Image extract_channel(const Image& img, int c);

/// Replicates a single-channel image into `channels` channels.
Image replicate_channels(const Image& gray, int channels);

/// Loads an 8-bit grayscale or RGB PNG (alpha dropped, palette expanded), scaled by 1/255.
Image load_png(const std::filesystem::path& path);

/// Writes an 8-bit PNG (1 or 3 channels). Values are clamped to [0,1], scaled by 255
/// and rounded half-to-even.
void save_png(const Image& img, const std::filesystem::path& path);

/// Quantizes a [0,1] value to 8 bits with the same rounding as save_png.
unsigned char quantize8(float v) noexcept;

}  // namespace ffasynth
