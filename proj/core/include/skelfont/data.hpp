#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skelfont/raster.hpp"
#include "skelfont/skeleton.hpp"
#include "skelfont/tensor.hpp"

namespace skelfont {

enum class Split { kTrain, kDev, kTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct ManifestEntry {
  std::string char_id;
  std::string style;
  std::string path;  // relative to the dataset root
  Split split = Split::kTrain;

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  bool operator==(const Manifest&) const = default;
};

struct ManifestBuild {
  Manifest manifest;
  std::vector<std::string> pair_eligible;  // char ids present in source and a target style
  std::vector<std::string> warnings;
};

struct SplitRatio {
  int train = 8;
  int dev = 1;
  int test = 1;
};

// Scans <root>/<style>/<char_id>.png. Splits are assigned per char id so a
// character never appears in two splits.
ManifestBuild build_manifest(const std::filesystem::path& root, SplitRatio ratio,
                             std::uint64_t seed, const std::string& source_style = "source");

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

std::filesystem::path skeleton_cache_path(const std::filesystem::path& root,
                                          const ManifestEntry& entry);

// x_img/x_skel/y_img/y_skel are 1 x H x W in [0, 1].
struct TrainingBatch {
  Tensor<float> x_img;
  Tensor<float> x_skel;
  Tensor<float> y_img;
  Tensor<float> y_skel;
  std::string char_id;   // source character
  std::string target_id; // equals char_id when paired
  bool paired = true;
  bool flipped = false;
};

struct GlyphPair {
  std::string char_id;
  RasterImage source;
  RasterImage source_skeleton;
  RasterImage target;
  RasterImage target_skeleton;
};

struct DatasetOptions {
  std::string source_style = "source";
  std::string target_style = "target";
  int image_size = 64;
  bool allow_unpaired = false;
  ThinningConfig thinning;  // used when a skeleton is missing from the cache
};

// In-memory view of a manifest: images and cached skeletons resized to the
// training resolution, grouped by split.
class GlyphDataset {
 public:
  GlyphDataset(const std::filesystem::path& root, const Manifest& manifest,
               DatasetOptions options = {});

  const std::vector<GlyphPair>& pairs(Split split) const;
  // Unpaired pools: every source glyph / every target glyph in the split.
  const std::vector<GlyphPair>& sources(Split split) const;
  const std::vector<GlyphPair>& targets(Split split) const;
  const DatasetOptions& options() const { return options_; }

  // Number of batches in one pass over the split.
  std::size_t epoch_length(Split split) const;

 private:
  DatasetOptions options_;
  std::map<Split, std::vector<GlyphPair>> pairs_;
  std::map<Split, std::vector<GlyphPair>> sources_;
  std::map<Split, std::vector<GlyphPair>> targets_;
};

// Deterministic in (seed, step): step maps to (epoch, index) and the order is
// a seeded shuffle per epoch. Train batches are flipped jointly with
// probability 0.5; dev/test batches are never flipped.
TrainingBatch next_batch(const GlyphDataset& data, Split split, std::uint64_t seed,
                         std::uint64_t step);

// Iterates one epoch; next() returns nullopt at the epoch boundary.
class EpochIterator {
 public:
  EpochIterator(const GlyphDataset& data, Split split, std::uint64_t seed, std::uint64_t epoch);
  std::optional<TrainingBatch> next();

 private:
  const GlyphDataset& data_;
  Split split_;
  std::uint64_t seed_;
  std::uint64_t first_step_;
  std::uint64_t index_ = 0;
  std::uint64_t length_;
};

Tensor<float> to_tensor(const RasterImage& img);
RasterImage to_image(const Tensor<float>& t);
Tensor<float> hflip(const Tensor<float>& t);

}  // namespace skelfont
