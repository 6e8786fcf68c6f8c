#include "ffasynth/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "ffasynth/error.hpp"

namespace ffasynth {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0 || channels <= 0) {
    throw ParameterError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                         std::to_string(height) + "x" + std::to_string(channels));
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image::Image(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width <= 0 || height <= 0 || channels <= 0) {
    throw ParameterError("image dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw ParameterError("image data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(width) + "x" +
                         std::to_string(height) + "x" + std::to_string(channels));
  }
}

Image to_gray(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.width(), img.height(), 1);
  const int c = img.channels();
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < c; ++k) s += src[i * c + k];
    dst[i] = static_cast<float>(s / c);
  }
  return out;
}

Image extract_channel(const Image& img, int c) {
  if (c < 0 || c >= img.channels()) throw ParameterError("channel index out of range");
  Image out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i * img.channels() + c];
  return out;
}

Image replicate_channels(const Image& gray, int channels) {
  if (gray.channels() != 1) throw ParameterError("replicate_channels expects a single-channel image");
  Image out(gray.width(), gray.height(), channels);
  auto src = gray.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i)
    for (int k = 0; k < channels; ++k) dst[i * channels + k] = src[i];
  return out;
}

unsigned char quantize8(float v) noexcept {
  if (!(v > 0.0f)) return 0;  // also maps NaN to 0
  if (v >= 1.0f) return 255;
  return static_cast<unsigned char>(std::lrint(v * 255.0f));
}

Image load_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError("cannot read PNG '" + path.string() + "': " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DataError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  std::vector<float> data(buffer.size());
  std::transform(buffer.begin(), buffer.end(), data.begin(),
                 [](unsigned char q) { return static_cast<float>(q) / 255.0f; });
  return Image(static_cast<int>(image.width), static_cast<int>(image.height), channels,
               std::move(data));
}

void save_png(const Image& img, const std::filesystem::path& path) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ParameterError("PNG output supports 1 or 3 channels");
  }
  std::vector<unsigned char> buffer(img.size());
  auto src = img.data();
  std::transform(src.begin(), src.end(), buffer.begin(), quantize8);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw DataError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

}  // namespace ffasynth
