#include "skelfont/raster.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace skelfont {

RasterImage::RasterImage(int channels, int height, int width, float fill)
    : pixels_({channels, height, width}, fill) {
  if (channels != 1 && channels != 3) {
    fail(ErrorCode::kInvalidArgument, "raster images have 1 or 3 channels");
  }
  if (height < 1 || width < 1) fail(ErrorCode::kInvalidArgument, "raster dimensions must be >= 1");
}

RasterImage::RasterImage(Tensor<float> pixels) : pixels_(std::move(pixels)) {
  if (pixels_.rank() != 3 || (pixels_.dim(0) != 1 && pixels_.dim(0) != 3) || pixels_.dim(1) < 1 ||
      pixels_.dim(2) < 1) {
    fail(ErrorCode::kInvalidArgument, "raster pixels must be 1xHxW or 3xHxW, got " +
                                          shape_string(pixels_.shape()));
  }
}

std::size_t BinaryGrid::count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

RasterImage load_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    fail(ErrorCode::kMissingFile, "no such image: " + path.string());
  }
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(ErrorCode::kIoError, "cannot open " + path.string());

  std::array<png_byte, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), file.get()) != sig.size() ||
      png_sig_cmp(sig.data(), 0, sig.size()) != 0) {
    fail(ErrorCode::kUnsupportedFormat, "not a PNG file: " + path.string());
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kIoError, "libpng initialisation failed");
  }
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kUnsupportedFormat, "corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, static_cast<int>(sig.size()));
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (bit_depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kUnsupportedFormat,
         "only 8-bit PNGs are supported (" + path.string() + " has depth " +
             std::to_string(bit_depth) + ")");
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) {
    fail(ErrorCode::kUnsupportedFormat, "unsupported channel layout in " + path.string());
  }
  RasterImage img(channels, static_cast<int>(height), static_cast<int>(width));
  for (int y = 0; y < static_cast<int>(height); ++y) {
    for (int x = 0; x < static_cast<int>(width); ++x) {
      for (int c = 0; c < channels; ++c) {
        img.at(c, y, x) = static_cast<float>(rows[y][x * channels + c]) / 255.0f;
      }
    }
  }
  return img;
}

void save_image(const RasterImage& img, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) fail(ErrorCode::kIoError, "cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIoError, "libpng initialisation failed");
  }
  const int channels = img.channels();
  const int h = img.height(), w = img.width();
  std::vector<png_byte> buffer(static_cast<std::size_t>(h) * w * channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        buffer[(static_cast<std::size_t>(y) * w + x) * channels + c] = quantize(img.at(c, y, x));
      }
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[y] = buffer.data() + static_cast<std::size_t>(y) * w * channels;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIoError, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) fail(ErrorCode::kIoError, "flush failed for " + path.string());
}

RasterImage to_gray(const RasterImage& img) {
  if (img.channels() == 1) return img;
  RasterImage out(1, img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(0, y, x) = (img.at(0, y, x) + img.at(1, y, x) + img.at(2, y, x)) / 3.0f;
    }
  }
  return out;
}

std::optional<float> otsu_threshold(const RasterImage& img) {
  std::array<double, 256> hist{};
  for (float v : img.pixels().values()) hist[quantize(v)] += 1.0;
  const double total = static_cast<double>(img.pixels().size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];

  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int first = -1, last = -1;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best * (1.0 + 1e-12) || first < 0) {
      best = between;
      first = last = t;
    } else if (std::abs(between - best) <= best * 1e-12) {
      last = t;
    }
  }
  if (first < 0) return std::nullopt;
  // Centre of the maximising plateau; pixel bin b is dark iff b <= t.
  const int t = (first + last) / 2;
  return (static_cast<float>(t) + 0.5f) / 255.0f;
}

BinarizeResult binarize(const RasterImage& img, Threshold threshold, Ink ink) {
  if (img.channels() != 1) {
    fail(ErrorCode::kChannelMismatch, "binarize expects a single-channel image");
  }
  BinarizeResult result;
  result.grid = BinaryGrid(img.height(), img.width());
  if (std::holds_alternative<OtsuThreshold>(threshold)) {
    auto t = otsu_threshold(img);
    if (!t) {
      result.degenerate = true;
      return result;
    }
    result.threshold = *t;
  } else {
    result.threshold = std::get<float>(threshold);
    if (!(result.threshold > 0.0f && result.threshold < 1.0f)) {
      fail(ErrorCode::kInvalidArgument, "binarize threshold must lie in (0, 1)");
    }
  }
  const float th = result.threshold;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const float v = img.at(0, y, x);
      result.grid.at(y, x) = (ink == Ink::kDark ? v < th : v > th) ? 1 : 0;
    }
  }
  return result;
}

RasterImage resize(const RasterImage& img, int height, int width) {
  if (height < 1 || width < 1) fail(ErrorCode::kInvalidArgument, "resize target must be >= 1x1");
  if (height == img.height() && width == img.width()) return img;
  RasterImage out(img.channels(), height, width);
  const double sy = static_cast<double>(img.height()) / height;
  const double sx = static_cast<double>(img.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1 - wx) * img.at(c, y0, x0) + wx * img.at(c, y0, x1);
        const double bot = (1 - wx) * img.at(c, y1, x0) + wx * img.at(c, y1, x1);
        const double v = (1 - wy) * top + wy * bot;
        out.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

RasterImage hflip(const RasterImage& img) {
  RasterImage out(img.channels(), img.height(), img.width());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) out.at(c, y, x) = img.at(c, y, img.width() - 1 - x);
    }
  }
  return out;
}

RasterImage grid_to_image(const BinaryGrid& grid) {
  RasterImage out(1, grid.height, grid.width, 1.0f);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      if (grid.at(y, x)) out.at(0, y, x) = 0.0f;
    }
  }
  return out;
}

}  // namespace skelfont
