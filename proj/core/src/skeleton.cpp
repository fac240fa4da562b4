#include "skelfont/skeleton.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace skelfont {
namespace {

// Neighbour bit layout, clockwise from north:
// bit0 N (P2), bit1 NE (P3), bit2 E (P4), bit3 SE (P5),
// bit4 S (P6), bit5 SW (P7), bit6 W (P8), bit7 NW (P9).
constexpr std::array<int, 8> kDy{-1, -1, 0, 1, 1, 1, 0, -1};
constexpr std::array<int, 8> kDx{0, 1, 1, 1, 0, -1, -1, -1};

constexpr bool bit(unsigned code, int i) { return (code >> i) & 1u; }

constexpr int ink_count(unsigned code) {
  int n = 0;
  for (int i = 0; i < 8; ++i) n += bit(code, i);
  return n;
}

// 0 -> 1 transitions around P2, P3, ..., P9, P2.
constexpr int transitions(unsigned code) {
  int n = 0;
  for (int i = 0; i < 8; ++i) n += (!bit(code, i) && bit(code, (i + 1) % 8));
  return n;
}

// Yokoi connectivity number for 8-connected ink; 1 iff the centre is simple.
constexpr int connectivity_number(unsigned code) {
  // Counter-clockwise from east: E, NE, N, NW, W, SW, S, SE.
  constexpr std::array<int, 8> ccw{2, 1, 0, 7, 6, 5, 4, 3};
  int n = 0;
  for (int k = 0; k < 8; k += 2) {
    const int a = !bit(code, ccw[k]);
    const int b = !bit(code, ccw[(k + 1) % 8]);
    const int c = !bit(code, ccw[(k + 2) % 8]);
    n += a - a * b * c;
  }
  return n;
}

struct Tables {
  std::array<bool, 256> first{};
  std::array<bool, 256> second{};
  std::array<bool, 256> simple{};
  std::array<std::uint8_t, 256> count{};
};

constexpr Tables build_tables() {
  Tables t{};
  for (unsigned code = 0; code < 256; ++code) {
    const int b = ink_count(code);
    const bool shared = b >= 2 && b <= 6 && transitions(code) == 1;
    const bool p2 = bit(code, 0), p4 = bit(code, 2), p6 = bit(code, 4), p8 = bit(code, 6);
    t.simple[code] = connectivity_number(code) == 1;
    t.first[code] = shared && !(p2 && p4 && p6) && !(p4 && p6 && p8) && t.simple[code];
    t.second[code] = shared && !(p2 && p4 && p8) && !(p2 && p6 && p8) && t.simple[code];
    t.count[code] = static_cast<std::uint8_t>(b);
  }
  return t;
}

constexpr Tables kTables = build_tables();

enum class Pass { kFirst, kSecond, kBlock };

// Ink plane with a one-pixel zero frame.
class PaddedGrid {
 public:
  explicit PaddedGrid(const BinaryGrid& g)
      : h_(g.height), w_(g.width), stride_(g.width + 2),
        cells_(static_cast<std::size_t>(g.height + 2) * (g.width + 2), 0) {
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) cells_[pad(y, x)] = g.at(y, x);
    }
    for (int i = 0; i < 8; ++i) offsets_[i] = kDy[i] * stride_ + kDx[i];
  }

  std::size_t pad(int y, int x) const {
    return static_cast<std::size_t>(y + 1) * stride_ + static_cast<std::size_t>(x + 1);
  }
  std::size_t pad(std::size_t raw) const {
    return pad(static_cast<int>(raw / w_), static_cast<int>(raw % w_));
  }

  unsigned code(std::size_t p) const {
    unsigned c = 0;
    for (int i = 0; i < 8; ++i) c |= static_cast<unsigned>(cells_[p + offsets_[i]]) << i;
    return c;
  }

  // True if p lies in some 2x2 window whose four cells are all ink.
  bool in_block(std::size_t p) const {
    const auto s = static_cast<std::ptrdiff_t>(stride_);
    for (std::ptrdiff_t dy : {-s, s}) {
      for (std::ptrdiff_t dx : {-1, 1}) {
        if (cells_[p + dy] && cells_[p + dx] && cells_[p + dy + dx]) return true;
      }
    }
    return false;
  }

  BinaryGrid to_grid() const {
    BinaryGrid g(h_, w_);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) g.at(y, x) = cells_[pad(y, x)];
    }
    return g;
  }

  std::vector<std::uint8_t>& cells() { return cells_; }
  const std::array<std::ptrdiff_t, 8>& offsets() const { return offsets_; }
  std::ptrdiff_t stride() const { return stride_; }

 private:
  int h_, w_;
  std::ptrdiff_t stride_;
  std::vector<std::uint8_t> cells_;
  std::array<std::ptrdiff_t, 8> offsets_{};
};

// One parallel sub-iteration. Returns the number of deleted pixels.
std::size_t sub_iteration(PaddedGrid& grid, Pass pass, std::span<const std::size_t> order,
                          std::vector<std::uint8_t>& candidate) {
  auto& cells = grid.cells();
  std::fill(candidate.begin(), candidate.end(), 0);

  for (std::size_t raw : order) {
    const std::size_t p = grid.pad(raw);
    if (!cells[p]) continue;
    const unsigned code = grid.code(p);
    bool mark = false;
    switch (pass) {
      case Pass::kFirst: mark = kTables.first[code]; break;
      case Pass::kSecond: mark = kTables.second[code]; break;
      case Pass::kBlock:
        mark = kTables.simple[code] && kTables.count[code] >= 2 && grid.in_block(p);
        break;
    }
    candidate[p] = mark;
  }

  // Candidates are accepted greedily in raster position order; a candidate is
  // skipped if its joint removal with an accepted neighbour is not
  // topology-preserving or if it would complete a 2x2 window of accepted
  // pixels. Decisions read only the previous state, and the position order
  // makes the outcome independent of the visit order.
  const auto& off = grid.offsets();
  const std::ptrdiff_t s = grid.stride();
  std::vector<std::size_t> marked;
  for (std::size_t raw : order) {
    const std::size_t p = grid.pad(raw);
    if (candidate[p]) marked.push_back(p);
  }
  std::sort(marked.begin(), marked.end());
  std::vector<std::size_t> removals;
  for (std::size_t p : marked) {
    bool keep = false;
    const unsigned cp = grid.code(p);
    for (int dir = 0; dir < 8 && !keep; ++dir) {
      const std::size_t q = p + off[dir];
      if (candidate[q] != 2) continue;
      const int back = (dir + 4) % 8;
      keep = !kTables.simple[cp & ~(1u << dir)] || !kTables.simple[grid.code(q) & ~(1u << back)];
    }
    for (std::ptrdiff_t dy : {-s, s}) {
      for (std::ptrdiff_t dx : {std::ptrdiff_t{-1}, std::ptrdiff_t{1}}) {
        if (candidate[p + dy] == 2 && candidate[p + dx] == 2 && candidate[p + dy + dx] == 2) {
          keep = true;
        }
      }
    }
    if (!keep) {
      candidate[p] = 2;
      removals.push_back(p);
    }
  }
  for (std::size_t p : removals) cells[p] = 0;
  return removals.size();
}

ThinResult thin_impl(const BinaryGrid& input, const ThinningConfig& cfg,
                     std::span<const std::size_t> order) {
  if (cfg.max_iterations < 1) fail(ErrorCode::kInvalidArgument, "max_iterations must be >= 1");
  ThinResult result;
  if (input.height == 0 || input.width == 0) {
    result.grid = input;
    return result;
  }
  PaddedGrid grid(input);
  std::vector<std::uint8_t> candidate(grid.cells().size(), 0);
  bool converged = false;
  while (result.iterations < cfg.max_iterations) {
    ++result.iterations;
    std::size_t removed = sub_iteration(grid, Pass::kFirst, order, candidate);
    removed += sub_iteration(grid, Pass::kSecond, order, candidate);
    if (removed == 0) removed = sub_iteration(grid, Pass::kBlock, order, candidate);
    if (removed == 0) {
      converged = true;
      break;
    }
  }
  result.grid = grid.to_grid();
  result.iteration_limit_reached = !converged;
  return result;
}

BinaryGrid square_filter(const BinaryGrid& grid, int radius, bool dilating) {
  BinaryGrid cur = grid;
  for (int r = 0; r < radius; ++r) {
    BinaryGrid next(cur.height, cur.width);
    for (int y = 0; y < cur.height; ++y) {
      for (int x = 0; x < cur.width; ++x) {
        bool any = false, all = true;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const bool v = cur.get(y + dy, x + dx);
            any = any || v;
            all = all && v;
          }
        }
        next.at(y, x) = dilating ? any : all;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace

ThinResult thin(const BinaryGrid& grid, const ThinningConfig& cfg) {
  std::vector<std::size_t> order(grid.cells.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return thin_impl(grid, cfg, order);
}

ThinResult thin_with_visit_order(const BinaryGrid& grid, const ThinningConfig& cfg,
                                 std::span<const std::size_t> order) {
  if (order.size() != grid.cells.size()) {
    fail(ErrorCode::kInvalidArgument, "visit order must cover every pixel exactly once");
  }
  return thin_impl(grid, cfg, order);
}

BinaryGrid dilate(const BinaryGrid& grid, int radius) { return square_filter(grid, radius, true); }

// Outside the grid counts as background, so ink touching the border erodes.
BinaryGrid erode(const BinaryGrid& grid, int radius) { return square_filter(grid, radius, false); }

BinaryGrid close(const BinaryGrid& grid, int radius) { return erode(dilate(grid, radius), radius); }

SkeletonResult extract_skeleton(const RasterImage& img, const ThinningConfig& cfg,
                                const BinarizeOptions& bin) {
  if (cfg.dilate_radius < 0) fail(ErrorCode::kInvalidArgument, "dilate_radius must be >= 0");
  SkeletonResult result;
  BinarizeResult binary = binarize(to_gray(img), bin.threshold, bin.ink);
  result.degenerate_histogram = binary.degenerate;
  // Closing seals pinholes in thick strokes; a set that thinning would leave
  // unchanged has none, and closing it would only fill corner notches.
  ThinningConfig probe = cfg;
  probe.max_iterations = 1;
  const bool already_thin = !thin(binary.grid, probe).iteration_limit_reached;
  BinaryGrid grid = cfg.pre_close && !already_thin ? close(binary.grid, 1) : std::move(binary.grid);
  ThinResult thinned = thin(grid, cfg);
  result.iteration_limit_reached = thinned.iteration_limit_reached;
  result.image = grid_to_image(dilate(thinned.grid, cfg.dilate_radius));
  return result;
}

BatchReport batch_skeletonize(const std::filesystem::path& src_dir,
                              const std::filesystem::path& dst_dir, const ThinningConfig& cfg,
                              const BinarizeOptions& bin) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(src_dir)) {
    fail(ErrorCode::kMissingFile, "input directory does not exist: " + src_dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(src_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  BatchReport report;
  for (const fs::path& file : files) {
    const fs::path rel = fs::relative(file, src_dir);
    try {
      SkeletonResult sk = extract_skeleton(load_image(file), cfg, bin);
      save_image(sk.image, dst_dir / rel);
      ++report.processed;
      if (sk.degenerate_histogram) report.warnings.push_back(rel.string() + ": constant image");
      if (sk.iteration_limit_reached) {
        report.warnings.push_back(rel.string() + ": iteration limit reached");
      }
    } catch (const Error& e) {
      report.warnings.push_back(rel.string() + ": " + e.what());
    }
  }
  return report;
}

}  // namespace skelfont
