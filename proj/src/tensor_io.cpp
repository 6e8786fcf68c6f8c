#include "ffasynth/tensor_io.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ffasynth/error.hpp"

namespace ffasynth {

namespace {

constexpr const char* kMagic = "FFASYNTH-TENSORS";

void put_f32(std::string& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f32(const unsigned char* p) {
  const std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                             (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

const Tensor* TensorFile::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  nlohmann::json manifest;
  manifest["format_version"] = kTensorFileVersion;
  manifest["header"] = file.header.is_null() ? nlohmann::json::object() : file.header;
  manifest["tensors"] = nlohmann::json::array();
  std::string blobs;
  for (const auto& [name, t] : file.tensors) {
    manifest["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", blobs.size()}});
    for (double v : t.values()) put_f32(blobs, v);
  }
  const std::string text = manifest.dump(1);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os << kMagic << '\n' << text.size() << '\n' << text;
  os.write(blobs.data(), static_cast<std::streamsize>(blobs.size()));
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open tensor file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << is.rdbuf();
  const std::string bytes = buffer.str();
  auto fail = [&](const std::string& why) {
    return DataError("corrupt tensor file '" + path.string() + "': " + why);
  };

  const std::size_t line1 = bytes.find('\n');
  if (line1 == std::string::npos || bytes.substr(0, line1) != kMagic) throw fail("bad magic");
  const std::size_t line2 = bytes.find('\n', line1 + 1);
  if (line2 == std::string::npos) throw fail("missing manifest length");
  std::size_t manifest_len = 0;
  try {
    manifest_len = std::stoull(bytes.substr(line1 + 1, line2 - line1 - 1));
  } catch (const std::exception&) {
    throw fail("bad manifest length");
  }
  const std::size_t manifest_at = line2 + 1;
  if (manifest_at + manifest_len > bytes.size()) throw fail("truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(manifest_at, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (manifest.value("format_version", 0) != kTensorFileVersion) throw fail("unsupported format version");

  const std::size_t blob_at = manifest_at + manifest_len;
  const auto* base = reinterpret_cast<const unsigned char*>(bytes.data()) + blob_at;
  const std::size_t blob_len = bytes.size() - blob_at;

  TensorFile file;
  file.header = manifest.value("header", nlohmann::json::object());
  try {
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<int>>();
      const auto offset = entry.at("offset").get<std::size_t>();
      Tensor t(shape);
      if (offset + 4 * t.size() > blob_len) throw fail("tensor '" + name + "' runs past end of file");
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f32(base + offset + 4 * i);
      file.tensors.emplace_back(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("bad tensor directory: ") + e.what());
  } catch (const ParameterError& e) {
    throw fail(e.what());
  }
  return file;
}

void append_params(TensorFile& file, const ParamSet& params, const std::string& prefix) {
  for (const auto& p : params) file.tensors.emplace_back(prefix + p.name, p.value);
}

void load_params(const TensorFile& file, ParamSet& params, const std::string& prefix,
                 const std::string& source) {
  for (auto& p : params) {
    const Tensor* t = file.find(prefix + p.name);
    if (t == nullptr) throw DataError("'" + source + "' has no tensor '" + prefix + p.name + "'");
    if (!t->same_shape(p.value)) {
      throw DataError("'" + source + "': tensor '" + prefix + p.name + "' has shape " +
                      t->shape_string() + ", expected " + p.value.shape_string());
    }
    p.value = *t;
  }
}

}  // namespace ffasynth
