#include "ffasynth/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "ffasynth/error.hpp"

namespace ffasynth {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<Category, const char*>, 5> kCategoryNames{{
    {Category::normal, "normal"},
    {Category::optic_disc_leakage, "optic-disc-leakage"},
    {Category::large_focal_leakage, "large-focal-leakage"},
    {Category::punctate_focal_leakage, "punctate-focal-leakage"},
    {Category::synthetic, "synthetic"},
}};

constexpr const char* kStructSuffix = "_struct.png";
constexpr const char* kFfaSuffix = "_ffa.png";

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_string(Category c) {
  for (const auto& [cat, name] : kCategoryNames)
    if (cat == c) return name;
  return "unknown";
}

std::optional<Category> category_from_string(const std::string& s) {
  for (const auto& [cat, name] : kCategoryNames)
    if (s == name) return cat;
  return std::nullopt;
}

std::string to_string(RoiMode m) { return m == RoiMode::circle ? "circle" : "none"; }

RoiMode roi_mode_from_string(const std::string& s) {
  if (s == "none") return RoiMode::none;
  if (s == "circle") return RoiMode::circle;
  throw ParameterError("unknown ROI mode '" + s + "' (expected none or circle)");
}

std::set<std::string> read_exclusion_list(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read exclusion list '" + path.string() + "'");
  std::set<std::string> ids;
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (!line.empty() && line[0] != '#') ids.insert(line);
  }
  return ids;
}

IngestResult ingest_pairs(const fs::path& root, const std::set<std::string>& excluded) {
  if (!fs::is_directory(root)) throw DataError("pairs directory '" + root.string() + "' not found");
  IngestResult result;

  std::vector<fs::path> category_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) category_dirs.push_back(e.path());
  std::sort(category_dirs.begin(), category_dirs.end());

  for (const auto& dir : category_dirs) {
    const auto category = category_from_string(dir.filename().string());
    if (!category) {
      result.warnings.push_back("skipping unknown category directory '" + dir.filename().string() + "'");
      continue;
    }
    std::map<std::string, std::pair<bool, bool>> ids;  // id -> (struct, ffa)
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      const std::string name = e.path().filename().string();
      if (ends_with(name, kStructSuffix)) {
        ids[name.substr(0, name.size() - std::string(kStructSuffix).size())].first = true;
      } else if (ends_with(name, kFfaSuffix)) {
        ids[name.substr(0, name.size() - std::string(kFfaSuffix).size())].second = true;
      }
    }
    for (const auto& [id, present] : ids) {
      if (excluded.count(id)) continue;
      const std::string where = dir.filename().string() + "/" + id;
      if (!present.first || !present.second) {
        result.warnings.push_back("orphan file for '" + where + "': missing " +
                                  (present.first ? "angiography" : "structure") + " counterpart");
        continue;
      }
      try {
        Image structure = load_png(dir / (id + kStructSuffix));
        Image angio = load_png(dir / (id + kFfaSuffix));
        if (structure.width() != angio.width() || structure.height() != angio.height()) {
          result.warnings.push_back("rejecting '" + where + "': structure " +
                                    std::to_string(structure.width()) + "x" + std::to_string(structure.height()) +
                                    " vs angiography " + std::to_string(angio.width()) + "x" +
                                    std::to_string(angio.height()));
          continue;
        }
        if (structure.channels() == 1) structure = replicate_channels(structure, 3);
        angio = to_gray(angio);
        result.pairs.push_back({std::move(structure), std::move(angio), *category, id, "", {}});
      } catch (const DataError& e) {
        result.warnings.push_back("rejecting '" + where + "': " + e.what());
      }
    }
  }
  return result;
}

std::vector<AlignedPair> preprocess_pair(const AlignedPair& pair, const PatchSpec& spec) {
  if (pair.structure.width() != pair.angiography.width() ||
      pair.structure.height() != pair.angiography.height()) {
    throw ParameterError("pair '" + pair.source_id + "' is not aligned in extent");
  }
  const auto origins = patch_grid(pair.structure.width(), pair.structure.height(), spec.width,
                                  spec.height, spec.stride_x, spec.stride_y);
  std::optional<Image> mask;
  if (spec.roi == RoiMode::circle) mask = circular_roi_mask(spec.width, spec.height);

  std::vector<AlignedPair> out;
  out.reserve(origins.size());
  for (const auto& o : origins) {
    Image s = crop(pair.structure, o.x, o.y, spec.width, spec.height);
    Image a = crop(pair.angiography, o.x, o.y, spec.width, spec.height);
    if (mask) {
      s = apply_mask(s, *mask);
      a = apply_mask(a, *mask);
    }
    out.push_back({std::move(s), std::move(a), pair.category,
                   pair.source_id + "_x" + std::to_string(o.x) + "_y" + std::to_string(o.y),
                   pair.source_id, o});
  }
  return out;
}

std::size_t test_count(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - ratio)));
}

DatasetSplit split_dataset(std::vector<AlignedPair> pairs, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("split ratio must lie in (0,1)");
  DatasetSplit split;
  split.seed = seed;
  split.ratio = ratio;

  std::map<Category, std::vector<AlignedPair>> by_category;
  for (auto& p : pairs) by_category[p.category].push_back(std::move(p));

  for (auto& [category, group] : by_category) {
    std::sort(group.begin(), group.end(),
              [](const AlignedPair& a, const AlignedPair& b) { return a.source_id < b.source_id; });
    if (group.size() < 2) {
      split.warnings.push_back("category '" + to_string(category) + "' has fewer than 2 pairs; all go to train");
      for (auto& p : group) split.train.push_back(std::move(p));
      continue;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(category)};
    std::mt19937_64 rng(seq);
    std::shuffle(group.begin(), group.end(), rng);
    const std::size_t n_test = test_count(group.size(), ratio);
    for (std::size_t i = 0; i < group.size(); ++i) {
      (i < n_test ? split.test : split.train).push_back(std::move(group[i]));
    }
  }
  return split;
}

void write_pairs(const fs::path& root, const std::vector<AlignedPair>& pairs) {
  for (const auto& p : pairs) {
    const fs::path dir = root / to_string(p.category);
    save_png(p.structure, dir / (p.source_id + kStructSuffix));
    save_png(p.angiography, dir / (p.source_id + kFfaSuffix));
  }
}

// ---- phantoms -------------------------------------------------------------

namespace {

void stamp_segment(std::vector<float>& vessels, int size, double x0, double y0, double x1, double y1,
                   double width) {
  const double half = width / 2.0;
  const int lo_x = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - half - 1)));
  const int hi_x = std::min(size - 1, static_cast<int>(std::ceil(std::max(x0, x1) + half + 1)));
  const int lo_y = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - half - 1)));
  const int hi_y = std::min(size - 1, static_cast<int>(std::ceil(std::max(y0, y1) + half + 1)));
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  for (int y = lo_y; y <= hi_y; ++y) {
    for (int x = lo_x; x <= hi_x; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      double t = len2 > 0.0 ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = px - (x0 + t * dx);
      const double ey = py - (y0 + t * dy);
      const double d = std::sqrt(ex * ex + ey * ey);
      const float coverage = static_cast<float>(std::clamp(half + 0.5 - d, 0.0, 1.0));
      float& v = vessels[static_cast<std::size_t>(y) * size + x];
      v = std::max(v, coverage);
    }
  }
}

}  // namespace

PhantomRender render_phantom(int size, std::uint64_t seed, int index) {
  if (size < 64) throw ParameterError("phantom size must be >= 64");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> turn(0.0, 0.3);

  std::vector<float> vessels(static_cast<std::size_t>(size) * size, 0.0f);
  const int polylines = 2 + static_cast<int>(unit(rng) * 3.0);
  const double step = size / 20.0;
  for (int l = 0; l < polylines; ++l) {
    double x = unit(rng) * size;
    double y = unit(rng) * size;
    double heading = unit(rng) * 2.0 * std::numbers::pi;
    const double width = 1.0 + 4.0 * unit(rng);
    for (int s = 0; s < 24; ++s) {
      const double nx = x + step * std::cos(heading);
      const double ny = y + step * std::sin(heading);
      stamp_segment(vessels, size, x, y, nx, ny, width);
      x = nx;
      y = ny;
      heading += turn(rng);
      if (x < -step || y < -step || x > size + step || y > size + step) break;
    }
  }

  PhantomRender out;
  Image structure(size, size, 3);
  Image angio(size, size, 1);
  const std::array<double, 3> tint{0.80, 0.42, 0.22};
  const double c = size / 2.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double v = vessels[static_cast<std::size_t>(y) * size + x];
      const double rx = (x + 0.5 - c) / c;
      const double ry = (y + 0.5 - c) / c;
      const double vignette = 1.0 - 0.25 * std::min(1.0, rx * rx + ry * ry);
      for (int ch = 0; ch < 3; ++ch)
        structure.at(x, y, ch) = static_cast<float>(tint[ch] * vignette * (1.0 - 0.55 * v));
      angio.at(x, y) = static_cast<float>(0.08 + 0.5 * v);
    }
  }
  out.angiography_without_blob = angio;

  if (unit(rng) < 0.5) {
    PhantomBlob blob;
    blob.sigma = 5.0 + 10.0 * unit(rng);
    blob.cx = blob.sigma + unit(rng) * (size - 2.0 * blob.sigma);
    blob.cy = blob.sigma + unit(rng) * (size - 2.0 * blob.sigma);
    blob.amplitude = 0.55 + 0.2 * unit(rng);
    const double r2max = blob.support_radius() * blob.support_radius();
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double dx = x + 0.5 - blob.cx;
        const double dy = y + 0.5 - blob.cy;
        const double d2 = dx * dx + dy * dy;
        if (d2 > r2max) continue;
        const double add = blob.amplitude * std::exp(-d2 / (2.0 * blob.sigma * blob.sigma));
        angio.at(x, y) = static_cast<float>(std::min(1.0, angio.at(x, y) + add));
      }
    }
    out.blob = blob;
  }

  out.pair = {std::move(structure), std::move(angio), Category::synthetic,
              "phantom_" + std::to_string(index), "", {}};
  return out;
}

std::vector<AlignedPair> synth_phantom_pairs(int n, int size, std::uint64_t seed) {
  if (n < 1) throw ParameterError("phantom count must be >= 1");
  std::vector<AlignedPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pairs.push_back(render_phantom(size, seed, i).pair);
  return pairs;
}

nlohmann::json split_manifest(const DatasetSplit& split, const PatchSpec& spec,
                              std::size_t train_patches, std::size_t test_patches) {
  nlohmann::json m;
  m["seed"] = split.seed;
  m["ratio"] = split.ratio;
  m["patch"] = {{"width", spec.width}, {"height", spec.height}, {"stride_x", spec.stride_x},
                {"stride_y", spec.stride_y}, {"roi", to_string(spec.roi)}};
  auto side = [](const std::vector<AlignedPair>& pairs) {
    nlohmann::json counts = nlohmann::json::object();
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& p : pairs) {
      counts[to_string(p.category)] = counts.value(to_string(p.category), 0) + 1;
      sources.push_back(p.source_id);
    }
    return nlohmann::json{{"counts", counts}, {"sources", sources}};
  };
  m["train"] = side(split.train);
  m["test"] = side(split.test);
  m["train"]["patches"] = train_patches;
  m["test"]["patches"] = test_patches;
  m["sources"] = split.train.size() + split.test.size();
  m["warnings"] = split.warnings;
  return m;
}

}  // namespace ffasynth
