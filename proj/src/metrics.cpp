#include "ffasynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "ffasynth/error.hpp"
#include "ffasynth/filters.hpp"

namespace ffasynth {

void SSIMParams::validate() const {
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw ParameterError("SSIM constants must be positive");
  if (mode == Mode::windowed) {
    FilterSpec{FilterSpec::Kind::gaussian, window, sigma}.validate();
  }
}

std::string to_string(SSIMParams::Mode mode) {
  return mode == SSIMParams::Mode::global ? "global" : "windowed";
}

SSIMParams::Mode ssim_mode_from_string(const std::string& s) {
  if (s == "global") return SSIMParams::Mode::global;
  if (s == "windowed") return SSIMParams::Mode::windowed;
  throw ParameterError("unknown SSIM mode '" + s + "' (expected global or windowed)");
}

namespace {

std::vector<double> scaled_gray(const Image& img) {
  const Image g = to_gray(img);
  std::vector<double> v(g.size());
  std::transform(g.data().begin(), g.data().end(), v.begin(),
                 [](float f) { return 255.0 * static_cast<double>(f); });
  return v;
}

void require_extent(const Image& x, const Image& y, const char* op) {
  if (x.width() != y.width() || x.height() != y.height()) {
    throw ParameterError(std::string(op) + ": image extents differ (" + std::to_string(x.width()) +
                         "x" + std::to_string(x.height()) + " vs " + std::to_string(y.width()) + "x" +
                         std::to_string(y.height()) + ")");
  }
}

double ssim_formula(double mx, double my, double vx, double vy, double cxy, const SSIMParams& p) {
  return ((2.0 * mx * my + p.c1) * (2.0 * cxy + p.c2)) /
         ((mx * mx + my * my + p.c1) * (vx + vy + p.c2));
}

}  // namespace

double mse(const Image& x, const Image& y) {
  require_extent(x, y, "mse");
  const auto a = scaled_gray(x);
  const auto b = scaled_gray(y);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double psnr_from_mse(double mse_value) {
  if (mse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse_value);
}

double psnr(const Image& x, const Image& y) { return psnr_from_mse(mse(x, y)); }

double ssim(const Image& x, const Image& y, const SSIMParams& p) {
  require_extent(x, y, "ssim");
  p.validate();
  const auto a = scaled_gray(x);
  const auto b = scaled_gray(y);
  const int w = x.width();
  const int h = x.height();

  if (p.mode == SSIMParams::Mode::global) {
    const double n = static_cast<double>(a.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      mx += a[i];
      my += b[i];
    }
    mx /= n;
    my /= n;
    double vx = 0.0, vy = 0.0, cxy = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      vx += (a[i] - mx) * (a[i] - mx);
      vy += (b[i] - my) * (b[i] - my);
      cxy += (a[i] - mx) * (b[i] - my);
    }
    return ssim_formula(mx, my, vx / n, vy / n, cxy / n, p);
  }

  int k = std::min({p.window, w, h});
  if (k % 2 == 0) --k;
  const auto taps = gaussian_kernel(k, p.sigma);
  const int r = k / 2;
  double total = 0.0;
  std::size_t windows = 0;
  for (int cy = r; cy + r < h; ++cy) {
    for (int cx = r; cx + r < w; ++cx) {
      double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double wt = taps[dy + r] * taps[dx + r];
          const std::size_t i = static_cast<std::size_t>(cy + dy) * w + (cx + dx);
          mx += wt * a[i];
          my += wt * b[i];
          sxx += wt * a[i] * a[i];
          syy += wt * b[i] * b[i];
          sxy += wt * a[i] * b[i];
        }
      }
      total += ssim_formula(mx, my, sxx - mx * mx, syy - my * my, sxy - mx * my, p);
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

MetricReport aggregate(std::vector<MetricRow> rows, std::vector<MetricError> errors) {
  MetricReport r;
  r.rows = std::move(rows);
  r.errors = std::move(errors);
  r.count = r.rows.size();
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  std::size_t finite = 0;
  for (const auto& row : r.rows) {
    ssim_sum += row.ssim;
    if (std::isinf(row.psnr)) {
      ++r.infinite_psnr;
    } else {
      psnr_sum += row.psnr;
      ++finite;
    }
  }
  r.mean_ssim = r.count ? ssim_sum / static_cast<double>(r.count) : 0.0;
  if (finite) {
    r.mean_psnr = psnr_sum / static_cast<double>(finite);
  } else {
    r.mean_psnr = r.count ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return r;
}

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "id,mse,psnr,ssim\n";
  for (const auto& row : rows) os << row.id << ',' << fmt(row.mse) << ',' << fmt(row.psnr) << ',' << fmt(row.ssim) << '\n';
  return os.str();
}

std::string MetricReport::summary() const {
  std::ostringstream os;
  os << "pairs evaluated: " << count << '\n'
     << "mean PSNR (dB): " << fmt(mean_psnr);
  if (infinite_psnr) os << "  (" << infinite_psnr << " identical pair(s) excluded)";
  os << '\n' << "mean SSIM: " << fmt(mean_ssim) << '\n';
  os << "errors: " << errors.size() << '\n';
  for (const auto& e : errors) os << "  " << e.id << ": " << e.message << '\n';
  return os.str();
}

MetricReport evaluate_dataset(const std::filesystem::path& pred_dir,
                              const std::filesystem::path& ref_dir, const SSIMParams& p) {
  namespace fs = std::filesystem;
  p.validate();
  if (!fs::is_directory(pred_dir)) throw DataError("prediction directory '" + pred_dir.string() + "' not found");
  if (!fs::is_directory(ref_dir)) throw DataError("reference directory '" + ref_dir.string() + "' not found");

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(pred_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(fs::relative(e.path(), pred_dir));
  }
  std::sort(files.begin(), files.end());

  std::vector<MetricRow> rows;
  std::vector<MetricError> errors;
  for (const auto& rel : files) {
    const std::string id = rel.generic_string();
    const fs::path ref = ref_dir / rel;
    if (!fs::exists(ref)) {
      errors.push_back({id, "no reference image"});
      continue;
    }
    try {
      const Image x = load_png(pred_dir / rel);
      const Image y = load_png(ref);
      const double m = mse(x, y);
      rows.push_back({id, m, psnr_from_mse(m), ssim(x, y, p)});
    } catch (const std::exception& e) {
      errors.push_back({id, e.what()});
    }
  }
  return aggregate(std::move(rows), std::move(errors));
}

}  // namespace ffasynth
