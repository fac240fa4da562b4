#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skelfont/tensor.hpp"

namespace skelfont {

struct CheckpointTensor {
  std::string path;
  Tensor<float> value;
};

// Directory layout: manifest.json plus one raw little-endian float32 file per
// tensor. The manifest lists {path, shape, dtype, file} for every tensor and
// carries free-form config and state objects.
struct Checkpoint {
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json state = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& path) const;
};

// Writes into a sibling staging directory and renames it over `dir`, so a
// failed write leaves any previous checkpoint intact.
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint read_checkpoint(const std::filesystem::path& dir);

// File name used for a tensor path: '/' becomes '.', plus ".bin".
std::string tensor_file_name(const std::string& path);

}  // namespace skelfont
