#include "skelfont/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numbers>

#include "skelfont/data.hpp"
#include "skelfont/rng.hpp"

namespace skelfont {
namespace {

using Point = Glyph::Point;
using Stroke = std::vector<Point>;

constexpr double kLo = 0.15;
constexpr double kHi = 0.85;
constexpr int kArcSegments = 24;

Stroke line_from(const Point& start, Rng& rng) {
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double len = rng.uniform(0.25, 0.55);
  return {start, {start.x + len * std::cos(angle), start.y + len * std::sin(angle)}};
}

// Arc through `start`: the centre sits one radius away from it.
Stroke arc_from(const Point& start, Rng& rng) {
  const double r = rng.uniform(0.12, 0.25);
  const double a0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const Point centre{start.x - r * std::cos(a0), start.y - r * std::sin(a0)};
  const double sweep = rng.uniform(0.5, 1.4) * std::numbers::pi * (rng.bernoulli(0.5) ? 1 : -1);
  Stroke s;
  for (int i = 0; i <= kArcSegments; ++i) {
    const double a = a0 + sweep * i / kArcSegments;
    s.push_back({centre.x + r * std::cos(a), centre.y + r * std::sin(a)});
  }
  return s;
}

Point point_on(const Stroke& s, Rng& rng) {
  const std::size_t seg = rng.below(s.size() - 1);
  const double t = rng.uniform();
  return {s[seg].x + t * (s[seg + 1].x - s[seg].x), s[seg].y + t * (s[seg + 1].y - s[seg].y)};
}

// Chained strokes inside [lo, hi]^2.
std::vector<Stroke> stroke_group(int count, double lo_x, double hi_x, Rng& rng) {
  std::vector<Stroke> group;
  int attempts = 0;
  while (static_cast<int>(group.size()) < count && attempts < 200) {
    ++attempts;
    Point start;
    if (group.empty()) {
      start = {rng.uniform(lo_x, hi_x), rng.uniform(kLo, kHi)};
    } else {
      start = point_on(group[rng.below(group.size())], rng);
    }
    Stroke s = rng.bernoulli(0.35) ? arc_from(start, rng) : line_from(start, rng);
    bool ok = std::all_of(s.begin(), s.end(), [&](const Point& p) {
      return p.x >= lo_x && p.x <= hi_x && p.y >= kLo && p.y <= kHi;
    });
    if (ok) group.push_back(std::move(s));
  }
  return group;
}

Glyph sample_glyph(Rng& rng) {
  Glyph g;
  const int strokes = 2 + static_cast<int>(rng.below(3));
  if (strokes >= 3 && rng.bernoulli(0.3)) {
    auto left = stroke_group(strokes - 1, kLo, 0.45, rng);
    auto right = stroke_group(1, 0.62, kHi, rng);
    g.strokes = std::move(left);
    g.strokes.insert(g.strokes.end(), right.begin(), right.end());
  } else {
    g.strokes = stroke_group(strokes, kLo, kHi, rng);
  }
  return g;
}

double segment_distance2(double px, double py, const Point& a, const Point& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - px, ey = a.y + t * dy - py;
  return ex * ex + ey * ey;
}

BinaryGrid rasterize(const Glyph& glyph, const StrokeStyle& style, int canvas, std::uint64_t seed,
                     int index) {
  Rng phase(derive_seed(seed, hash_tag("deform"), static_cast<std::uint64_t>(index)));
  const double two_pi = 2.0 * std::numbers::pi;
  const double ph[4] = {phase.uniform(0, two_pi), phase.uniform(0, two_pi),
                        phase.uniform(0, two_pi), phase.uniform(0, two_pi)};
  const double c = canvas / 2.0;
  const double r2 = style.stroke_width * style.stroke_width / 4.0;

  std::vector<Stroke> px;
  for (const Stroke& s : glyph.strokes) {
    Stroke t;
    for (const Point& p : s) t.push_back({p.x * canvas, p.y * canvas});
    px.push_back(std::move(t));
  }

  BinaryGrid grid(canvas, canvas);
  for (int y = 0; y < canvas; ++y) {
    for (int x = 0; x < canvas; ++x) {
      double u = x + 0.5, v = y + 0.5;
      // Undo the smooth deformation, then the shear.
      const double su = u / canvas, sv = v / canvas;
      u -= style.jitter * std::sin(two_pi * sv + ph[0]) * std::cos(std::numbers::pi * su + ph[1]);
      v -= style.jitter * std::sin(two_pi * su + ph[2]) * std::cos(std::numbers::pi * sv + ph[3]);
      u -= style.slant * (c - v);
      bool ink = false;
      for (const Stroke& s : px) {
        for (std::size_t i = 0; i + 1 < s.size() && !ink; ++i) {
          ink = segment_distance2(u, v, s[i], s[i + 1]) <= r2;
        }
        if (ink) break;
      }
      grid.at(y, x) = ink;
    }
  }
  return grid;
}

}  // namespace

Glyph make_glyph(std::uint64_t seed, int index) {
  Rng rng(derive_seed(seed, hash_tag("glyph"), static_cast<std::uint64_t>(index)));
  return sample_glyph(rng);
}

RasterImage render_glyph(const Glyph& glyph, const StrokeStyle& style, int canvas,
                         std::uint64_t seed, int index) {
  return grid_to_image(rasterize(glyph, style, canvas, seed, index));
}

int count_components(const BinaryGrid& grid) {
  std::vector<std::uint8_t> seen(grid.cells.size(), 0);
  std::deque<std::pair<int, int>> queue;
  int components = 0;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * grid.width + x;
      if (!grid.cells[i] || seen[i]) continue;
      ++components;
      seen[i] = 1;
      queue.emplace_back(y, x);
      while (!queue.empty()) {
        auto [cy, cx] = queue.front();
        queue.pop_front();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = cy + dy, nx = cx + dx;
            if (!grid.get(ny, nx)) continue;
            const std::size_t j = static_cast<std::size_t>(ny) * grid.width + nx;
            if (!seen[j]) {
              seen[j] = 1;
              queue.emplace_back(ny, nx);
            }
          }
        }
      }
    }
  }
  return components;
}

std::string glyph_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "g%04d", index);
  return buf;
}

SynthReport synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir,
                         const ThinningConfig& thinning) {
  namespace fs = std::filesystem;
  if (spec.glyph_count < 1) fail(ErrorCode::kInvalidArgument, "glyph_count must be >= 1");
  if (spec.canvas < 4 || spec.canvas % 4 != 0) {
    fail(ErrorCode::kBadSpatialSize, "canvas must be a positive multiple of 4");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + out_dir.string() + ": " + ec.message());

  SynthReport report;
  for (int i = 0; i < spec.glyph_count; ++i) {
    // Resample until both styles agree on the number of stroke components.
    BinaryGrid src, tgt;
    for (int attempt = 0;; ++attempt) {
      const int key = i + attempt * spec.glyph_count;
      const Glyph glyph = make_glyph(spec.seed, key);
      src = rasterize(glyph, spec.source_style, spec.canvas, spec.seed, key);
      tgt = rasterize(glyph, spec.target_style, spec.canvas, spec.seed, key);
      if (count_components(src) == count_components(tgt) && src.count() > 0) break;
      if (attempt > 1000) fail(ErrorCode::kInvalidArgument, "cannot satisfy glyph constraints");
    }
    const std::string id = glyph_id(i);
    for (auto [style, grid] : {std::pair{"source", &src}, std::pair{"target", &tgt}}) {
      const RasterImage img = grid_to_image(*grid);
      save_image(img, out_dir / style / (id + ".png"));
      save_image(extract_skeleton(img, thinning).image, out_dir / "_skeletons" / style / (id + ".png"));
      ++report.images;
      ++report.skeletons;
    }
    ++report.glyphs;
  }
  ManifestBuild built = build_manifest(out_dir, SplitRatio{}, spec.seed);
  report.manifest = out_dir / "manifest.json";
  write_manifest(built.manifest, report.manifest);
  return report;
}

}  // namespace skelfont
