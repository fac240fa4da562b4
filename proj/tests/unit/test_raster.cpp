#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "skelfont/raster.hpp"

namespace fs = std::filesystem;
using namespace skelfont;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("skelfont_raster_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RasterImage filled(int h, int w, float v) { return RasterImage(1, h, w, v); }

}  // namespace

TEST(Raster, LoadBlackWhiteAndMidGray) {
  const fs::path dir = temp_dir("load");
  save_image(filled(4, 4, 0.0f), dir / "black.png");
  save_image(filled(4, 4, 1.0f), dir / "white.png");
  RasterImage mid = filled(1, 1, 128.0f / 255.0f);
  save_image(mid, dir / "mid.png");

  const RasterImage black = load_image(dir / "black.png");
  const RasterImage white = load_image(dir / "white.png");
  for (float v : black.pixels().values()) EXPECT_EQ(v, 0.0f);
  for (float v : white.pixels().values()) EXPECT_EQ(v, 1.0f);
  EXPECT_NEAR(load_image(dir / "mid.png").at(0, 0, 0), 0.50196, 1e-5);
}

TEST(Raster, LoadErrors) {
  const fs::path dir = temp_dir("errors");
  try {
    load_image(dir / "absent.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingFile);
  }
  std::ofstream(dir / "text.png") << "not a png";
  try {
    load_image(dir / "text.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedFormat);
  }
}

TEST(Raster, RoundTripWithinQuantization) {
  const fs::path dir = temp_dir("roundtrip");
  RasterImage img(1, 5, 7);
  for (std::size_t i = 0; i < img.pixels().size(); ++i) img.pixels()[i] = static_cast<float>(i) / 34.0f;
  save_image(img, dir / "a.png");
  const RasterImage back = load_image(dir / "a.png");
  ASSERT_EQ(back.pixels().shape(), img.pixels().shape());
  for (std::size_t i = 0; i < img.pixels().size(); ++i) {
    EXPECT_LE(std::abs(back.pixels()[i] - img.pixels()[i]), 1.0f / 255.0f + 1e-7f);
  }
  save_image(filled(3, 3, 0.5f), dir / "half.png");
  EXPECT_NEAR(load_image(dir / "half.png").at(0, 1, 1), 0.5f, 1.0f / 255.0f);
}

TEST(Raster, ColorKeepsThreeChannels) {
  const fs::path dir = temp_dir("color");
  RasterImage img(3, 2, 2, 0.25f);
  img.at(1, 0, 0) = 1.0f;
  save_image(img, dir / "c.png");
  const RasterImage back = load_image(dir / "c.png");
  EXPECT_EQ(back.channels(), 3);
  EXPECT_EQ(back.at(1, 0, 0), 1.0f);
  EXPECT_NEAR(to_gray(back).at(0, 0, 0), (0.25f + 1.0f + 0.25f) / 3.0f, 2.0f / 255.0f);
}

TEST(Raster, BinarizeFixedThreshold) {
  const BinarizeResult white = binarize(filled(4, 4, 1.0f), 0.5f, Ink::kDark);
  EXPECT_EQ(white.grid.count(), 0u);

  RasterImage img = filled(2, 2, 1.0f);
  img.at(0, 1, 0) = 0.2f;
  const BinarizeResult r = binarize(img, 0.5f, Ink::kDark);
  EXPECT_EQ(r.grid.at(1, 0), 1);
  EXPECT_EQ(r.grid.count(), 1u);

  const BinarizeResult light = binarize(img, 0.5f, Ink::kLight);
  EXPECT_EQ(light.grid.count(), 3u);
}

TEST(Raster, OtsuSeparatesTwoModes) {
  RasterImage img(1, 4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) img.at(0, y, x) = (x < 2) ? 0.1f : 0.9f;
  }
  const BinarizeResult r = binarize(img, OtsuThreshold{}, Ink::kDark);
  EXPECT_GT(r.threshold, 0.1f);
  EXPECT_LT(r.threshold, 0.9f);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) EXPECT_EQ(r.grid.at(y, x), x < 2 ? 1 : 0);
  }
}

TEST(Raster, OtsuOnConstantImageIsDegenerate) {
  const BinarizeResult r = binarize(filled(3, 3, 0.4f), OtsuThreshold{}, Ink::kDark);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.grid.count(), 0u);
}

TEST(Raster, BinarizeRejectsColor) {
  try {
    binarize(RasterImage(3, 2, 2), 0.5f, Ink::kDark);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kChannelMismatch);
  }
}

TEST(Raster, ResizeIdentityConstantsAndCheckerboard) {
  RasterImage img(1, 3, 5);
  for (std::size_t i = 0; i < img.pixels().size(); ++i) img.pixels()[i] = static_cast<float>(i % 7) / 6.0f;
  EXPECT_EQ(resize(img, 3, 5), img);

  for (auto [h, w] : {std::pair{1, 1}, std::pair{7, 3}, std::pair{16, 16}}) {
    const RasterImage r = resize(filled(4, 4, 0.3f), h, w);
    for (float v : r.pixels().values()) EXPECT_FLOAT_EQ(v, 0.3f);
  }

  RasterImage checker(1, 2, 2);
  checker.at(0, 0, 0) = 1.0f;
  checker.at(0, 1, 1) = 1.0f;
  EXPECT_FLOAT_EQ(resize(checker, 1, 1).at(0, 0, 0), 0.5f);
}

TEST(Raster, ResizeStaysInRange) {
  RasterImage img(1, 5, 5);
  for (std::size_t i = 0; i < img.pixels().size(); ++i) img.pixels()[i] = (i % 2) ? 1.0f : 0.0f;
  const RasterImage r = resize(img, 13, 9);
  for (float v : r.pixels().values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}
