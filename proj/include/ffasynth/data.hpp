#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffasynth/filters.hpp"
#include "ffasynth/image.hpp"

namespace ffasynth {

enum class Category { normal, optic_disc_leakage, large_focal_leakage, punctate_focal_leakage, synthetic };

std::string to_string(Category c);
/// Parses the directory name of a category; nullopt for unknown names.
std::optional<Category> category_from_string(const std::string& s);

/// A registered structure (3-channel) / angiography (1-channel) pair.
struct AlignedPair {
  Image structure;
  Image angiography;
  Category category = Category::synthetic;
  std::string source_id;
  /// For patches: the source pair they were cut from and the patch origin.
  std::string parent_id;
  PatchOrigin origin;
};

struct IngestResult {
  std::vector<AlignedPair> pairs;
  std::vector<std::string> warnings;
};

/// Loads root/<category>/<id>_struct.png + <id>_ffa.png. Orphans and shape mismatches are
/// skipped with a warning; ids listed in `excluded` are skipped silently. Pairs come back
/// ordered by (category directory, id).
IngestResult ingest_pairs(const std::filesystem::path& root, const std::set<std::string>& excluded = {});

/// One source_id per line; blank lines and lines starting with '#' are ignored.
std::set<std::string> read_exclusion_list(const std::filesystem::path& path);

enum class RoiMode { none, circle };
std::string to_string(RoiMode m);
RoiMode roi_mode_from_string(const std::string& s);

struct PatchSpec {
  int width = 512;
  int height = 512;
  int stride_x = 512;
  int stride_y = 512;
  RoiMode roi = RoiMode::none;
};

/// Co-located patches of both images; with RoiMode::circle both are multiplied by the
/// circular mask. Patch ids are "<source>_x<ox>_y<oy>".
std::vector<AlignedPair> preprocess_pair(const AlignedPair& pair, const PatchSpec& spec);

struct DatasetSplit {
  std::vector<AlignedPair> train;
  std::vector<AlignedPair> test;
  std::uint64_t seed = 0;
  double ratio = 0.8;
  std::vector<std::string> warnings;
};

/// Number of test pairs drawn from a category of n pairs: round(n·(1 − ratio)).
std::size_t test_count(std::size_t n, double ratio);

/// Per-category seeded shuffle, then the first test_count pairs go to test. Categories
/// with fewer than two pairs go entirely to train with a warning.
DatasetSplit split_dataset(std::vector<AlignedPair> pairs, double ratio, std::uint64_t seed);

/// Writes pairs in the ingest layout.
void write_pairs(const std::filesystem::path& root, const std::vector<AlignedPair>& pairs);

struct PhantomBlob {
  double cx = 0.0;
  double cy = 0.0;
  double sigma = 0.0;
  double amplitude = 0.0;
  /// The blob is truncated at this distance from its center.
  double support_radius() const noexcept { return 3.0 * sigma; }
};

struct PhantomRender {
  AlignedPair pair;
  Image angiography_without_blob;
  std::optional<PhantomBlob> blob;
};

/// Renders the phantom with the given per-pair seed: random-walk vessel polylines
/// (1–5 px wide) dark on an orange fundus-like structure image and bright on a dark
/// angiography, plus, with probability 0.5, a Gaussian leakage blob that appears only in
/// the angiography.
PhantomRender render_phantom(int size, std::uint64_t seed, int index);

/// n phantom pairs, ids "phantom_<index>".
std::vector<AlignedPair> synth_phantom_pairs(int n, int size, std::uint64_t seed);

/// Counts per category and the source ids of each side.
nlohmann::json split_manifest(const DatasetSplit& split, const PatchSpec& spec,
                              std::size_t train_patches, std::size_t test_patches);

}  // namespace ffasynth
