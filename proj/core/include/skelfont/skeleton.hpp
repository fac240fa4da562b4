#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "skelfont/raster.hpp"

namespace skelfont {

struct ThinningConfig {
  int max_iterations = 100;
  bool pre_close = true;   // dilate-then-erode with a 3x3 square before thinning
  int dilate_radius = 1;   // square dilation applied to the thinned result
};

struct ThinResult {
  BinaryGrid grid;
  int iterations = 0;
  bool iteration_limit_reached = false;
};

// Parallel two-sub-iteration thinning. Each sub-iteration marks deletion
// candidates from the previous state only, then accepts them in position order,
// skipping any whose joint removal with an accepted neighbour could change
// topology. Once the directional passes are stable, a cleanup sub-iteration
// removes simple pixels that still sit in an all-ink 2x2 window.
ThinResult thin(const BinaryGrid& grid, const ThinningConfig& cfg = {});

// Same as thin() but visits pixels in `order` (a permutation of row-major
// indices) inside every sub-iteration. Used to check order independence.
ThinResult thin_with_visit_order(const BinaryGrid& grid, const ThinningConfig& cfg,
                                 std::span<const std::size_t> order);

BinaryGrid dilate(const BinaryGrid& grid, int radius);
BinaryGrid erode(const BinaryGrid& grid, int radius);
BinaryGrid close(const BinaryGrid& grid, int radius);

struct BinarizeOptions {
  Threshold threshold = 0.5f;
  Ink ink = Ink::kDark;
};

struct SkeletonResult {
  RasterImage image;  // black skeleton on white, same size as the input
  bool degenerate_histogram = false;
  bool iteration_limit_reached = false;
};

SkeletonResult extract_skeleton(const RasterImage& img, const ThinningConfig& cfg = {},
                                const BinarizeOptions& bin = {});

struct BatchReport {
  int processed = 0;
  std::vector<std::string> warnings;
};

// Mirrors every *.png under src_dir into dst_dir. Per-file failures are
// reported, not thrown. Files are processed in sorted path order.
BatchReport batch_skeletonize(const std::filesystem::path& src_dir,
                              const std::filesystem::path& dst_dir, const ThinningConfig& cfg = {},
                              const BinarizeOptions& bin = {});

}  // namespace skelfont
