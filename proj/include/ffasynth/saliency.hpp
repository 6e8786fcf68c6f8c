#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "ffasynth/image.hpp"

namespace ffasynth {

/// Parameters of the local saliency map of an angiography image.
///
/// The median window must be wider than the largest vessel (~15 px at 768² resolution)
/// and narrower than the optic disc (~120 px) so that it returns the background only.
struct SaliencyConfig {
  int median_kernel = 51;
  int gaussian_kernel = 7;
  double gaussian_sigma = 1.5;
  double a = 1.0;  ///< contrast factor

  friend bool operator==(const SaliencyConfig&, const SaliencyConfig&) = default;

  void validate() const;
};

/// Signed per-pixel saliency, not clamped.
struct SaliencyMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;
  double contrast_factor = 1.0;

  float at(int x, int y) const noexcept { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Background estimate: the median filter of the image with `cfg.median_kernel`.
Image estimate_background(const Image& img, const SaliencyConfig& cfg);

/// a · (gaussian(img) − median(img)). Computed at a = 1 and then scaled, so maps for
/// different `a` are exact multiples of each other.
SaliencyMap compute_saliency(const Image& img, const SaliencyConfig& cfg);

/// Renders a map for viewing. A map with both signs is scaled symmetrically so that 0
/// lands on 0.5; a one-signed map is min-max stretched; a constant map becomes 0.5.
/// With `color`, a blue-white-red diverging ramp gives a 3-channel image.
Image saliency_to_visual(const SaliencyMap& map, bool color = false);

/// Raw export: uint32 width, uint32 height, then width·height float32, all little-endian.
void write_raw_map(const SaliencyMap& map, const std::filesystem::path& path);
SaliencyMap read_raw_map(const std::filesystem::path& path);

}  // namespace ffasynth
