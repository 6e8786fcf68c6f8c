#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ffasynth/image.hpp"

namespace ffasynth {

struct SSIMParams {
  enum class Mode { global, windowed };
  double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  Mode mode = Mode::global;
  int window = 11;      ///< windowed mode only
  double sigma = 1.5;   ///< windowed mode only

  void validate() const;
  friend bool operator==(const SSIMParams&, const SSIMParams&) = default;
};

std::string to_string(SSIMParams::Mode mode);
SSIMParams::Mode ssim_mode_from_string(const std::string& s);

/// Mean squared difference of the 255-scaled values. Color inputs are reduced to the
/// channel mean first.
double mse(const Image& x, const Image& y);

/// 10·log10(255²/MSE) in dB; +infinity when the images are identical.
double psnr(const Image& x, const Image& y);
double psnr_from_mse(double mse_value);

/// Structural similarity on 255-scaled values: whole-image moments (global) or the
/// mean over Gaussian-weighted windows that fit inside the image (windowed).
double ssim(const Image& x, const Image& y, const SSIMParams& p = {});

struct MetricRow {
  std::string id;
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricError {
  std::string id;
  std::string message;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  std::vector<MetricError> errors;
  double mean_psnr = 0.0;      ///< over rows with finite PSNR; +inf if every row is infinite
  double mean_ssim = 0.0;
  std::size_t count = 0;
  std::size_t infinite_psnr = 0;  ///< rows excluded from mean_psnr

  /// "id,mse,psnr,ssim" rows followed by nothing else; infinite PSNR prints as "inf".
  std::string to_csv() const;
  /// Human-readable aggregate block, including error entries.
  std::string summary() const;
};

/// Recomputes the aggregates from `rows`.
MetricReport aggregate(std::vector<MetricRow> rows, std::vector<MetricError> errors = {});

/// Pairs every PNG under `pred_dir` with the file at the same relative path under
/// `ref_dir`, in lexicographic order. Missing or unreadable counterparts become error
/// entries and are excluded from the aggregates.
MetricReport evaluate_dataset(const std::filesystem::path& pred_dir,
                              const std::filesystem::path& ref_dir, const SSIMParams& p = {});

}  // namespace ffasynth
