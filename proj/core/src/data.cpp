#include "skelfont/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "skelfont/rng.hpp"

namespace skelfont {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  fail(ErrorCode::kConfigError, "unknown split '" + std::string(name) + "'");
}

namespace {

bool is_png(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

}  // namespace

ManifestBuild build_manifest(const fs::path& root, SplitRatio ratio, std::uint64_t seed,
                             const std::string& source_style) {
  if (!fs::is_directory(root)) fail(ErrorCode::kMissingFile, "dataset root not found: " + root.string());
  if (ratio.train < 0 || ratio.dev < 0 || ratio.test < 0 || ratio.train + ratio.dev + ratio.test <= 0) {
    fail(ErrorCode::kInvalidArgument, "split ratio must be non-negative with a positive sum");
  }

  // style -> char_id -> relative path
  std::map<std::string, std::map<std::string, std::string>> styles;
  std::vector<fs::path> style_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.empty() || name[0] == '_' || name[0] == '.') continue;
    style_dirs.push_back(entry.path());
  }
  std::sort(style_dirs.begin(), style_dirs.end());
  for (const fs::path& dir : style_dirs) {
    const std::string style = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && is_png(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorCode::kEmptyStyle, "style '" + style + "' has no PNG files");
    auto& ids = styles[style];
    for (const fs::path& f : files) {
      const std::string id = f.stem().string();
      const std::string rel = fs::relative(f, root).generic_string();
      auto [it, inserted] = ids.emplace(id, rel);
      if (!inserted) {
        fail(ErrorCode::kDuplicateCharId,
             "char id '" + id + "' appears twice in style '" + style + "': " + it->second + ", " + rel);
      }
    }
  }
  if (styles.empty()) fail(ErrorCode::kEmptyStyle, "no style directories under " + root.string());

  std::set<std::string> all_ids;
  for (const auto& [style, ids] : styles) {
    for (const auto& [id, path] : ids) all_ids.insert(id);
  }

  ManifestBuild out;
  const auto src = styles.find(source_style);
  for (const std::string& id : all_ids) {
    const bool in_source = src != styles.end() && src->second.count(id);
    bool in_target = false;
    for (const auto& [style, ids] : styles) {
      if (style != source_style && ids.count(id)) in_target = true;
    }
    if (in_source && in_target) {
      out.pair_eligible.push_back(id);
    } else if (in_source) {
      out.warnings.push_back("char '" + id + "' only in source style; not pair-eligible");
    } else {
      out.warnings.push_back("char '" + id + "' missing from source style; not pair-eligible");
    }
  }

  std::vector<std::string> order(all_ids.begin(), all_ids.end());
  Rng rng(derive_seed(seed, hash_tag("split")));
  rng.shuffle(order.begin(), order.end());
  const std::size_t n = order.size();
  const int total = ratio.train + ratio.dev + ratio.test;
  const std::size_t n_dev = n * static_cast<std::size_t>(ratio.dev) / static_cast<std::size_t>(total);
  const std::size_t n_test = n * static_cast<std::size_t>(ratio.test) / static_cast<std::size_t>(total);
  std::map<std::string, Split> assign;
  for (std::size_t i = 0; i < n; ++i) {
    assign[order[i]] = i < n_dev ? Split::kDev : i < n_dev + n_test ? Split::kTest : Split::kTrain;
  }

  for (const auto& [style, ids] : styles) {
    for (const auto& [id, path] : ids) {
      out.manifest.entries.push_back({id, style, path, assign.at(id)});
    }
  }
  return out;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  json arr = json::array();
  for (const ManifestEntry& e : manifest.entries) {
    arr.push_back({{"char_id", e.char_id},
                   {"style", e.style},
                   {"path", e.path},
                   {"split", std::string(split_name(e.split))}});
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIoError, "cannot write " + path.string());
  f << arr.dump(1) << "\n";
  if (!f) fail(ErrorCode::kIoError, "write failed: " + path.string());
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::kMissingFile, "manifest not found: " + path.string());
  json arr;
  try {
    f >> arr;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, "malformed manifest " + path.string() + ": " + e.what());
  }
  if (!arr.is_array()) fail(ErrorCode::kConfigError, "manifest must be a JSON array");
  Manifest m;
  std::set<std::tuple<std::string, std::string, Split>> seen;
  for (const json& j : arr) {
    try {
      ManifestEntry e{j.at("char_id").get<std::string>(), j.at("style").get<std::string>(),
                      j.at("path").get<std::string>(),
                      parse_split(j.at("split").get<std::string>())};
      if (!seen.emplace(e.char_id, e.style, e.split).second) {
        fail(ErrorCode::kDuplicateCharId, "duplicate (char_id, style) '" + e.char_id + "', '" +
                                              e.style + "' in manifest");
      }
      m.entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfigError, std::string("malformed manifest entry: ") + e.what());
    }
  }
  return m;
}

fs::path skeleton_cache_path(const fs::path& root, const ManifestEntry& entry) {
  return root / "_skeletons" / entry.style / (entry.char_id + ".png");
}

Tensor<float> to_tensor(const RasterImage& img) { return to_gray(img).pixels(); }

RasterImage to_image(const Tensor<float>& t) { return RasterImage(t); }

Tensor<float> hflip(const Tensor<float>& t) {
  Tensor<float> out(t.shape());
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.at(k, y, w - 1 - x) = t.at(k, y, x);
    }
  }
  return out;
}

namespace {

RasterImage load_sized(const fs::path& path, int size) {
  RasterImage img = to_gray(load_image(path));
  if (img.height() != size || img.width() != size) img = resize(img, size, size);
  return img;
}

RasterImage load_skeleton(const fs::path& root, const ManifestEntry& e, int size,
                          const ThinningConfig& thinning) {
  const fs::path cached = skeleton_cache_path(root, e);
  if (fs::exists(cached)) return load_sized(cached, size);
  // Thin at native resolution, then resize like every other image.
  RasterImage sk = extract_skeleton(to_gray(load_image(root / e.path)), thinning).image;
  if (sk.height() != size || sk.width() != size) sk = resize(sk, size, size);
  return sk;
}

}  // namespace

GlyphDataset::GlyphDataset(const fs::path& root, const Manifest& manifest, DatasetOptions options)
    : options_(std::move(options)) {
  if (options_.image_size < 4 || options_.image_size % 4 != 0) {
    fail(ErrorCode::kBadSpatialSize, "image_size must be a positive multiple of 4");
  }
  const int size = options_.image_size;
  struct Loaded {
    RasterImage img, skel;
  };
  // split -> char_id -> style images
  std::map<Split, std::map<std::string, Loaded>> src, tgt;
  for (const ManifestEntry& e : manifest.entries) {
    const bool is_src = e.style == options_.source_style;
    const bool is_tgt = e.style == options_.target_style;
    if (!is_src && !is_tgt) continue;
    Loaded l{load_sized(root / e.path, size), load_skeleton(root, e, size, options_.thinning)};
    (is_src ? src : tgt)[e.split][e.char_id] = std::move(l);
  }
  for (Split split : {Split::kTrain, Split::kDev, Split::kTest}) {
    auto& pairs = pairs_[split];
    auto& sources = sources_[split];
    auto& targets = targets_[split];
    for (const auto& [id, s] : src[split]) {
      sources.push_back({id, s.img, s.skel, {}, {}});
      auto it = tgt[split].find(id);
      if (it != tgt[split].end()) pairs.push_back({id, s.img, s.skel, it->second.img, it->second.skel});
    }
    for (const auto& [id, t] : tgt[split]) targets.push_back({id, {}, {}, t.img, t.skel});
  }
}

const std::vector<GlyphPair>& GlyphDataset::pairs(Split split) const { return pairs_.at(split); }
const std::vector<GlyphPair>& GlyphDataset::sources(Split split) const { return sources_.at(split); }
const std::vector<GlyphPair>& GlyphDataset::targets(Split split) const { return targets_.at(split); }

std::size_t GlyphDataset::epoch_length(Split split) const {
  if (options_.allow_unpaired) return targets(split).empty() ? 0 : sources(split).size();
  return pairs(split).size();
}

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch,
                                     std::string_view tag) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, hash_tag(tag), epoch));
  rng.shuffle(order.begin(), order.end());
  return order;
}

}  // namespace

TrainingBatch next_batch(const GlyphDataset& data, Split split, std::uint64_t seed,
                         std::uint64_t step) {
  const std::size_t n = data.epoch_length(split);
  if (n == 0) {
    fail(ErrorCode::kExhaustedSplit, "split '" + std::string(split_name(split)) + "' has no batches");
  }
  const std::uint64_t epoch = step / n;
  const std::size_t idx = static_cast<std::size_t>(step % n);

  TrainingBatch b;
  if (!data.options().allow_unpaired) {
    const GlyphPair& p = data.pairs(split)[epoch_order(n, seed, epoch, "order")[idx]];
    b.x_img = p.source.pixels();
    b.x_skel = p.source_skeleton.pixels();
    b.y_img = p.target.pixels();
    b.y_skel = p.target_skeleton.pixels();
    b.char_id = b.target_id = p.char_id;
  } else {
    const auto& sources = data.sources(split);
    const auto& targets = data.targets(split);
    const GlyphPair& s = sources[epoch_order(n, seed, epoch, "order")[idx]];
    const auto t_order = epoch_order(targets.size(), seed, epoch, "target-order");
    const GlyphPair& t = targets[t_order[idx % targets.size()]];
    b.x_img = s.source.pixels();
    b.x_skel = s.source_skeleton.pixels();
    b.y_img = t.target.pixels();
    b.y_skel = t.target_skeleton.pixels();
    b.char_id = s.char_id;
    b.target_id = t.char_id;
    b.paired = s.char_id == t.char_id;
  }

  if (split == Split::kTrain) {
    Rng rng(derive_seed(seed, hash_tag("flip"), step));
    if (rng.bernoulli(0.5)) {
      b.flipped = true;
      b.x_img = hflip(b.x_img);
      b.x_skel = hflip(b.x_skel);
      b.y_img = hflip(b.y_img);
      b.y_skel = hflip(b.y_skel);
    }
  }
  return b;
}

EpochIterator::EpochIterator(const GlyphDataset& data, Split split, std::uint64_t seed,
                             std::uint64_t epoch)
    : data_(data), split_(split), seed_(seed), length_(data.epoch_length(split)) {
  first_step_ = epoch * length_;
}

std::optional<TrainingBatch> EpochIterator::next() {
  if (index_ >= length_) return std::nullopt;
  return next_batch(data_, split_, seed_, first_step_ + index_++);
}

}  // namespace skelfont
