#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "skelfont/raster.hpp"
#include "skelfont/skeleton.hpp"

namespace skelfont {

struct StrokeStyle {
  double stroke_width = 3.0;  // pixels
  double slant = 0.0;         // horizontal shear, x += slant * (centre_y - y)
  double jitter = 0.0;        // amplitude in pixels of a smooth deformation field
};

struct SynthSpec {
  int glyph_count = 200;
  int canvas = 64;
  StrokeStyle source_style{3.0, 0.0, 0.0};
  StrokeStyle target_style{5.0, 0.25, 2.0};
  std::uint64_t seed = 7;
};

// Stroke topology in unit coordinates; rendered once per style.
struct Glyph {
  struct Point {
    double x, y;
  };
  std::vector<std::vector<Point>> strokes;  // dense polylines
};

// 2-4 strokes of lines and arcs. Strokes are chained so each one starts on an
// earlier stroke; some glyphs carry a second, well separated group.
Glyph make_glyph(std::uint64_t seed, int index);

// Deformation phase is derived from (seed, index) so the same glyph always
// renders identically in a given style.
RasterImage render_glyph(const Glyph& glyph, const StrokeStyle& style, int canvas,
                         std::uint64_t seed, int index);

// Number of 8-connected ink components.
int count_components(const BinaryGrid& grid);

std::string glyph_id(int index);

struct SynthReport {
  int glyphs = 0;
  int images = 0;
  int skeletons = 0;
  std::filesystem::path manifest;
};

// Writes <out>/source/<id>.png, <out>/target/<id>.png, the thinned skeleton
// cache under <out>/_skeletons/<style>/ and <out>/manifest.json.
SynthReport synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir,
                         const ThinningConfig& thinning = {});

}  // namespace skelfont
