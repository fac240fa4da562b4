#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "corpus.hpp"
#include "skelfont/data.hpp"

namespace fs = std::filesystem;
using namespace skelfont;

namespace {

DatasetOptions sized(int size, bool unpaired = false) {
  DatasetOptions o;
  o.image_size = size;
  o.allow_unpaired = unpaired;
  return o;
}

void write_blank(const fs::path& p) {
  fs::create_directories(p.parent_path());
  save_image(RasterImage(1, 8, 8, 1.0f), p);
}

}  // namespace

TEST(Manifest, TenCharsSplitEightOneOne) {
  const fs::path root = testutil::scratch("manifest10");
  for (int i = 0; i < 10; ++i) {
    write_blank(root / "source" / (glyph_id(i) + ".png"));
    write_blank(root / "target" / (glyph_id(i) + ".png"));
  }
  const ManifestBuild b = build_manifest(root, {8, 1, 1}, 3);
  EXPECT_EQ(b.pair_eligible.size(), 10u);
  EXPECT_TRUE(b.warnings.empty());
  std::map<Split, std::set<std::string>> by_split;
  for (const ManifestEntry& e : b.manifest.entries) by_split[e.split].insert(e.char_id);
  EXPECT_EQ(by_split[Split::kTrain].size(), 8u);
  EXPECT_EQ(by_split[Split::kDev].size(), 1u);
  EXPECT_EQ(by_split[Split::kTest].size(), 1u);
  // A character never straddles splits.
  std::map<std::string, Split> seen;
  for (const ManifestEntry& e : b.manifest.entries) {
    auto [it, fresh] = seen.emplace(e.char_id, e.split);
    EXPECT_EQ(it->second, e.split);
  }
  EXPECT_EQ(build_manifest(root, {8, 1, 1}, 3).manifest, b.manifest);
}

TEST(Manifest, SourceOnlyCharIsWarnedAbout) {
  const fs::path root = testutil::scratch("manifest_src_only");
  write_blank(root / "source" / "a.png");
  write_blank(root / "target" / "a.png");
  write_blank(root / "source" / "b.png");
  const ManifestBuild b = build_manifest(root, {8, 1, 1}, 0);
  EXPECT_EQ(b.pair_eligible, std::vector<std::string>{"a"});
  ASSERT_EQ(b.warnings.size(), 1u);
  EXPECT_NE(b.warnings[0].find("'b'"), std::string::npos);
}

TEST(Manifest, Errors) {
  const fs::path root = testutil::scratch("manifest_errors");
  try {
    build_manifest(root / "absent", {8, 1, 1}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingFile);
  }
  fs::create_directories(root / "source");
  try {
    build_manifest(root, {8, 1, 1}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyStyle);
  }
  write_blank(root / "source" / "a.png");
  write_blank(root / "source" / "nested" / "a.png");
  try {
    build_manifest(root, {8, 1, 1}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateCharId);
  }
  EXPECT_THROW(build_manifest(root, {0, 0, 0}, 0), Error);
}

TEST(Manifest, WriteReadRoundTrip) {
  const fs::path root = testutil::corpus("unit20", 20, 32);
  const Manifest m = read_manifest(root / "manifest.json");
  EXPECT_EQ(m.entries.size(), 40u);
  const fs::path out = testutil::scratch("manifest_rt") / "m.json";
  write_manifest(m, out);
  EXPECT_EQ(read_manifest(out), m);
  std::ofstream(out) << "{\"not\": \"an array\"}";
  EXPECT_THROW(read_manifest(out), Error);
}

TEST(Synth, CorpusIsDeterministicAndSized) {
  SynthSpec spec;
  spec.glyph_count = 4;
  spec.canvas = 32;
  const fs::path a = testutil::scratch("synth_a"), b = testutil::scratch("synth_b");
  const SynthReport r = synth_corpus(spec, a);
  synth_corpus(spec, b);
  EXPECT_EQ(r.images, 8);
  EXPECT_EQ(r.skeletons, 8);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    std::ifstream fa(e.path(), std::ios::binary), fb(b / rel, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_EQ(sa, sb) << rel;
    if (e.path().extension() == ".png") {
      const RasterImage img = load_image(e.path());
      EXPECT_EQ(img.height(), 32);
      EXPECT_EQ(img.width(), 32);
    }
  }
}

TEST(Dataset, PairsAndBatches) {
  const fs::path root = testutil::corpus("unit20", 20, 32);
  const GlyphDataset data(root, read_manifest(root / "manifest.json"), sized(32));
  EXPECT_EQ(data.pairs(Split::kTrain).size(), 16u);
  EXPECT_EQ(data.pairs(Split::kDev).size(), 2u);
  EXPECT_EQ(data.pairs(Split::kTest).size(), 2u);

  const TrainingBatch a = next_batch(data, Split::kTrain, 5, 3);
  const TrainingBatch b = next_batch(data, Split::kTrain, 5, 3);
  EXPECT_EQ(a.x_img, b.x_img);
  EXPECT_EQ(a.char_id, b.char_id);
  EXPECT_EQ(a.flipped, b.flipped);
  EXPECT_TRUE(a.paired);
  EXPECT_EQ(a.x_img.shape(), (Shape{1, 32, 32}));

  // One epoch visits every pair once.
  std::set<std::string> ids;
  for (std::uint64_t s = 16; s < 32; ++s) ids.insert(next_batch(data, Split::kTrain, 5, s).char_id);
  EXPECT_EQ(ids.size(), 16u);
}

TEST(Dataset, FlipsAreJointAndTrainOnly) {
  const fs::path root = testutil::corpus("unit20", 20, 32);
  const GlyphDataset data(root, read_manifest(root / "manifest.json"), sized(32));
  int flips = 0;
  for (std::uint64_t s = 0; s < 64; ++s) {
    const TrainingBatch b = next_batch(data, Split::kTrain, 1, s);
    if (!b.flipped) continue;
    ++flips;
    const auto& pairs = data.pairs(Split::kTrain);
    const auto it = std::find_if(pairs.begin(), pairs.end(), [&](const GlyphPair& p) { return p.char_id == b.char_id; });
    ASSERT_NE(it, pairs.end());
    EXPECT_EQ(b.x_img, hflip(it->source.pixels()));
    EXPECT_EQ(b.x_skel, hflip(it->source_skeleton.pixels()));
    EXPECT_EQ(b.y_img, hflip(it->target.pixels()));
    EXPECT_EQ(b.y_skel, hflip(it->target_skeleton.pixels()));
  }
  EXPECT_GT(flips, 10);
  EXPECT_LT(flips, 54);
  for (std::uint64_t s = 0; s < 20; ++s) {
    EXPECT_FALSE(next_batch(data, Split::kDev, 1, s).flipped);
    EXPECT_FALSE(next_batch(data, Split::kTest, 1, s).flipped);
  }
}

TEST(Dataset, SkeletonsMatchExtraction) {
  const fs::path root = testutil::corpus("unit20", 20, 32);
  const GlyphDataset data(root, read_manifest(root / "manifest.json"), sized(32));
  for (const GlyphPair& p : data.pairs(Split::kDev)) {
    EXPECT_EQ(p.source_skeleton, extract_skeleton(p.source).image) << p.char_id;
  }
}

TEST(Dataset, EpochIteratorStopsAtBoundary) {
  const fs::path root = testutil::corpus("unit20", 20, 32);
  const GlyphDataset data(root, read_manifest(root / "manifest.json"), sized(32));
  EpochIterator it(data, Split::kDev, 0, 0);
  int n = 0;
  while (it.next()) ++n;
  EXPECT_EQ(n, 2);
}

TEST(Dataset, UnpairedMode) {
  const fs::path root = testutil::scratch("unpaired");
  SynthSpec spec;
  spec.glyph_count = 6;
  spec.canvas = 16;
  synth_corpus(spec, root);
  fs::remove(root / "target" / "g0000.png");
  const ManifestBuild mb = build_manifest(root, {1, 0, 0}, 0);
  EXPECT_EQ(mb.pair_eligible.size(), 5u);
  const GlyphDataset paired(root, mb.manifest, sized(16));
  EXPECT_EQ(paired.epoch_length(Split::kTrain), 5u);
  const GlyphDataset unpaired(root, mb.manifest, sized(16, true));
  EXPECT_EQ(unpaired.epoch_length(Split::kTrain), 6u);
  EXPECT_THROW(next_batch(paired, Split::kDev, 0, 0), Error);
}

TEST(Dataset, BadImageSize) {
  const fs::path root = testutil::corpus("unit20", 20, 32);
  EXPECT_THROW(GlyphDataset(root, read_manifest(root / "manifest.json"), sized(30)), Error);
}
