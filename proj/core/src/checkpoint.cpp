#include "skelfont/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace skelfont {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

void write_floats(const fs::path& file, const Tensor<float>& t) {
  std::vector<std::uint32_t> raw(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    raw[i] = to_little(std::bit_cast<std::uint32_t>(t[i]));
  }
  std::ofstream f(file, std::ios::binary);
  f.write(reinterpret_cast<const char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
  if (!f) fail(ErrorCode::kIoError, "cannot write " + file.string());
}

Tensor<float> read_floats(const fs::path& file, const Shape& shape) {
  std::ifstream f(file, std::ios::binary | std::ios::ate);
  if (!f) fail(ErrorCode::kMissingFile, "checkpoint tensor missing: " + file.string());
  const auto bytes = static_cast<std::size_t>(f.tellg());
  const std::size_t n = shape_size(shape);
  if (bytes != n * sizeof(float)) {
    fail(ErrorCode::kManifestMismatch, file.string() + " holds " + std::to_string(bytes) +
                                           " bytes, shape " + shape_string(shape) + " needs " +
                                           std::to_string(n * sizeof(float)));
  }
  f.seekg(0);
  std::vector<std::uint32_t> raw(n);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!f) fail(ErrorCode::kIoError, "cannot read " + file.string());
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<float>(to_little(raw[i]));
  return Tensor<float>(shape, std::move(values));
}

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& path) const {
  for (const auto& t : tensors) {
    if (t.path == path) return &t;
  }
  return nullptr;
}

std::string tensor_file_name(const std::string& path) {
  std::string name = path;
  std::replace(name.begin(), name.end(), '/', '.');
  return name + ".bin";
}

void write_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  const fs::path target = dir.lexically_normal();
  const fs::path staging = target.string() + ".partial";
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + staging.string() + ": " + ec.message());

  json params = json::array();
  for (const CheckpointTensor& t : ckpt.tensors) {
    const std::string file = tensor_file_name(t.path);
    write_floats(staging / file, t.value);
    params.push_back({{"path", t.path}, {"shape", t.value.shape()}, {"dtype", "float32"}, {"file", file}});
  }
  json manifest = {{"format", kFormatVersion},
                   {"config", ckpt.config},
                   {"state", ckpt.state},
                   {"parameters", params}};
  {
    std::ofstream f(staging / "manifest.json", std::ios::binary);
    f << manifest.dump(1) << "\n";
    if (!f) fail(ErrorCode::kIoError, "cannot write manifest in " + staging.string());
  }
  fs::remove_all(target, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot replace " + target.string() + ": " + ec.message());
  fs::rename(staging, target, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot move checkpoint into " + target.string() + ": " + ec.message());
}

Checkpoint read_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream f(manifest_path);
  if (!f) fail(ErrorCode::kMissingFile, "checkpoint manifest not found: " + manifest_path.string());
  json manifest;
  try {
    f >> manifest;
  } catch (const json::exception& e) {
    fail(ErrorCode::kManifestMismatch, "malformed checkpoint manifest: " + std::string(e.what()));
  }
  Checkpoint ckpt;
  try {
    if (manifest.at("format").get<int>() != kFormatVersion) {
      fail(ErrorCode::kManifestMismatch, "unsupported checkpoint format " + manifest.at("format").dump());
    }
    ckpt.config = manifest.at("config");
    ckpt.state = manifest.at("state");
    for (const json& p : manifest.at("parameters")) {
      if (p.at("dtype").get<std::string>() != "float32") {
        fail(ErrorCode::kManifestMismatch, "unsupported dtype " + p.at("dtype").dump());
      }
      const Shape shape = p.at("shape").get<Shape>();
      ckpt.tensors.push_back({p.at("path").get<std::string>(),
                              read_floats(dir / p.at("file").get<std::string>(), shape)});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kManifestMismatch, "malformed checkpoint manifest: " + std::string(e.what()));
  }
  return ckpt;
}

}  // namespace skelfont
