#include "ffasynth/saliency.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ffasynth/error.hpp"
#include "ffasynth/filters.hpp"

namespace ffasynth {

void SaliencyConfig::validate() const {
  FilterSpec{FilterSpec::Kind::median, median_kernel, 1.0}.validate();
  FilterSpec{FilterSpec::Kind::gaussian, gaussian_kernel, gaussian_sigma}.validate();
  if (!std::isfinite(a)) throw ParameterError("saliency contrast factor must be finite");
}

namespace {

void require_gray(const Image& img, const char* op) {
  if (img.channels() != 1) {
    throw ParameterError(std::string(op) + " expects a single-channel image");
  }
}

}  // namespace

Image estimate_background(const Image& img, const SaliencyConfig& cfg) {
  require_gray(img, "estimate_background");
  return median_filter(img, cfg.median_kernel);
}

SaliencyMap compute_saliency(const Image& img, const SaliencyConfig& cfg) {
  require_gray(img, "compute_saliency");
  cfg.validate();
  const int w = img.width();
  const int h = img.height();
  const Image background = estimate_background(img, cfg);

  std::vector<double> in(img.size());
  std::copy(img.data().begin(), img.data().end(), in.begin());
  std::vector<double> smooth(in.size());
  plane::gaussian(in, w, h, gaussian_kernel(cfg.gaussian_kernel, cfg.gaussian_sigma), smooth);

  SaliencyMap map{w, h, std::vector<float>(in.size()), cfg.a};
  const float a = static_cast<float>(cfg.a);
  auto bg = background.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const float unit = static_cast<float>(smooth[i]) - bg[i];
    map.data[i] = a * unit;
  }
  return map;
}

Image saliency_to_visual(const SaliencyMap& map, bool color) {
  Image gray(map.width, map.height, 1);
  auto dst = gray.data();
  const auto [lo_it, hi_it] = std::minmax_element(map.data.begin(), map.data.end());
  const double lo = map.data.empty() ? 0.0 : *lo_it;
  const double hi = map.data.empty() ? 0.0 : *hi_it;
  for (std::size_t i = 0; i < map.data.size(); ++i) {
    const double v = map.data[i];
    double t = 0.5;
    if (lo < 0.0 && hi > 0.0) {
      t = 0.5 + 0.5 * v / std::max(-lo, hi);
    } else if (hi > lo) {
      t = (v - lo) / (hi - lo);
    }
    dst[i] = static_cast<float>(std::clamp(t, 0.0, 1.0));
  }
  if (!color) return gray;

  Image rgb(map.width, map.height, 3);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const float t = gray.at(x, y);
      // blue (0) -> white (0.5) -> red (1)
      const float up = std::min(1.0f, 2.0f * t);
      const float down = std::min(1.0f, 2.0f * (1.0f - t));
      rgb.at(x, y, 0) = down < 1.0f ? 1.0f : up;
      rgb.at(x, y, 1) = std::min(up, down);
      rgb.at(x, y, 2) = up < 1.0f ? 1.0f : down;
    }
  }
  return rgb;
}

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(sizeof(T) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  const std::array<char, 4> bytes{static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                                  static_cast<char>((bits >> 16) & 0xff),
                                  static_cast<char>((bits >> 24) & 0xff)};
  os.write(bytes.data(), 4);
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, 4> bytes{};
  is.read(reinterpret_cast<char*>(bytes.data()), 4);
  const std::uint32_t bits = std::uint32_t{bytes[0]} | (std::uint32_t{bytes[1]} << 8) |
                             (std::uint32_t{bytes[2]} << 16) | (std::uint32_t{bytes[3]} << 24);
  T value;
  std::memcpy(&value, &bits, 4);
  return value;
}

}  // namespace

void write_raw_map(const SaliencyMap& map, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  put_le(os, static_cast<std::uint32_t>(map.width));
  put_le(os, static_cast<std::uint32_t>(map.height));
  for (float v : map.data) put_le(os, v);
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

SaliencyMap read_raw_map(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open raw map '" + path.string() + "'");
  SaliencyMap map;
  map.width = static_cast<int>(get_le<std::uint32_t>(is));
  map.height = static_cast<int>(get_le<std::uint32_t>(is));
  if (!is || map.width <= 0 || map.height <= 0) {
    throw DataError("raw map '" + path.string() + "' has a bad header");
  }
  map.data.resize(static_cast<std::size_t>(map.width) * map.height);
  for (float& v : map.data) v = get_le<float>(is);
  if (!is) throw DataError("raw map '" + path.string() + "' is truncated");
  return map;
}

}  // namespace ffasynth
