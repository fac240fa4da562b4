#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

#include "skelfont/tensor.hpp"

namespace skelfont {

// Grayscale (1 x H x W) or color (3 x H x W) image with values in [0, 1].
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int channels, int height, int width, float fill = 0.0f);
  explicit RasterImage(Tensor<float> pixels);

  int channels() const { return pixels_.dim(0); }
  int height() const { return pixels_.dim(1); }
  int width() const { return pixels_.dim(2); }
  bool empty() const { return pixels_.empty(); }

  float& at(int c, int y, int x) { return pixels_.at(c, y, x); }
  float at(int c, int y, int x) const { return pixels_.at(c, y, x); }

  const Tensor<float>& pixels() const { return pixels_; }
  Tensor<float>& pixels() { return pixels_; }

  bool operator==(const RasterImage&) const = default;

 private:
  Tensor<float> pixels_;
};

// H x W grid of {0, 1}; 1 marks ink.
struct BinaryGrid {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> cells;

  BinaryGrid() = default;
  BinaryGrid(int h, int w) : height(h), width(w), cells(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return cells[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return cells[static_cast<std::size_t>(y) * width + x]; }
  // Zero outside the grid.
  std::uint8_t get(int y, int x) const {
    return (y < 0 || x < 0 || y >= height || x >= width) ? 0 : at(y, x);
  }
  std::size_t count() const;

  bool operator==(const BinaryGrid&) const = default;
};

enum class Ink { kDark, kLight };

struct OtsuThreshold {};
using Threshold = std::variant<float, OtsuThreshold>;

struct BinarizeResult {
  BinaryGrid grid;
  float threshold = 0.5f;       // threshold actually applied
  bool degenerate = false;      // constant image under Otsu; grid is all zero
};

RasterImage load_image(const std::filesystem::path& path);
void save_image(const RasterImage& img, const std::filesystem::path& path);

// Unweighted channel mean; identity on grayscale input.
RasterImage to_gray(const RasterImage& img);

BinarizeResult binarize(const RasterImage& img, Threshold threshold, Ink ink);
// Otsu threshold on the 256-bin histogram; nullopt for a constant image.
std::optional<float> otsu_threshold(const RasterImage& img);

// Bilinear with half-pixel centres.
RasterImage resize(const RasterImage& img, int height, int width);
RasterImage hflip(const RasterImage& img);

// Ink 1 -> 0.0 (black), background -> 1.0 (white).
RasterImage grid_to_image(const BinaryGrid& grid);

}  // namespace skelfont
