#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ffasynth/tensor.hpp"

namespace ffasynth {

/// Single-file tensor container:
///
///   FFASYNTH-TENSORS\n
///   <manifest byte length>\n
///   <JSON manifest: format_version, header, tensors[{name, shape, offset}]>
///   <raw little-endian float32 blobs; offsets are relative to the first blob byte>
struct TensorFile {
  nlohmann::json header;
  std::vector<std::pair<std::string, Tensor>> tensors;

  /// Tensor by name, or nullptr.
  const Tensor* find(const std::string& name) const;
};

inline constexpr int kTensorFileVersion = 1;

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile read_tensor_file(const std::filesystem::path& path);

/// Appends every parameter of `params` with `prefix` prepended to its name.
void append_params(TensorFile& file, const ParamSet& params, const std::string& prefix = "");

/// Fills `params` from tensors named prefix+name. Throws DataError naming the file
/// when a tensor is missing or has the wrong shape.
void load_params(const TensorFile& file, ParamSet& params, const std::string& prefix,
                 const std::string& source);

}  // namespace ffasynth
