#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "skelfont/checkpoint.hpp"
#include "skelfont/data.hpp"
#include "skelfont/nn.hpp"
#include "skelfont/raster.hpp"

namespace skelfont {

struct ClassifierConfig {
  int image_size = 64;
  int feature_dim = 64;
  int epochs = 40;
  double lr = 1e-3;
  int max_shift = 3;      // augmentation: integer translation in [-max_shift, max_shift]
  int heldout_views = 2;  // per class, for the sanity check
  std::uint64_t seed = 0;
};

struct LabeledImage {
  std::string label;
  Tensor<float> pixels;  // 1 x H x W in [0, 1]
};

// Every glyph of `style` in the manifest, any split, resized to `image_size`.
std::vector<LabeledImage> style_samples(const std::filesystem::path& root, const Manifest& manifest,
                                        const std::string& style, int image_size);

// Three stride-2 convolutions (16, 32, 32 channels), a ReLU feature layer of
// feature_dim units, then one logit per class.
class GlyphClassifier {
 public:
  GlyphClassifier(std::vector<std::string> classes, const ClassifierConfig& cfg);

  const std::vector<std::string>& classes() const { return classes_; }
  const ClassifierConfig& config() const { return cfg_; }
  ParamSet<float>& params() { return params_; }
  const ParamSet<float>& params() const { return params_; }

  Var<float> logits(const Var<float>& x) const;
  Var<float> features(const Var<float>& x) const;

  // Inference; inputs are resized when their size differs.
  std::vector<double> probabilities(const Tensor<float>& img) const;
  std::vector<double> feature_vector(const Tensor<float>& img) const;
  int predict(const Tensor<float>& img) const;
  int class_index(const std::string& label) const;  // UnknownLabel
  // Checks 1 x H x W and resizes to image_size.
  Tensor<float> prepare(const Tensor<float>& img) const;

  Checkpoint checkpoint() const;
  static GlyphClassifier from_checkpoint(const Checkpoint& ckpt);  // ManifestMismatch

 private:
  std::vector<std::string> classes_;
  ClassifierConfig cfg_;
  ParamSet<float> params_;
  Conv2d<float> c1_, c2_, c3_;
  Var<float> fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

struct ClassifierReport {
  double train_accuracy = 0;
  // Half-pixel translations within the augmentation range; training only
  // ever sees integer offsets.
  double heldout_accuracy = 0;
  std::int64_t steps = 0;
};

// Bilinear translation with the corner pixel as background fill. Integer
// offsets move pixels exactly.
Tensor<float> shift_image(const Tensor<float>& img, double dy, double dx);

// Needs at least two distinct labels (InsufficientClasses).
GlyphClassifier train_classifier(const std::vector<LabeledImage>& samples, const ClassifierConfig& cfg,
                                 ClassifierReport* report = nullptr);

// EmptyInput on no images, UnknownLabel when a label is not a class,
// ShapeMismatch when counts differ.
double content_accuracy(const GlyphClassifier& model, const std::vector<Tensor<float>>& images,
                        const std::vector<std::string>& labels);

struct FeatureStats {
  int dim = 0;
  std::vector<double> mean;
  std::vector<double> cov;  // dim x dim, row-major
};

// Unbiased (1/(n-1)) covariance; EmptyInput when fewer than two rows.
FeatureStats feature_stats(const std::vector<std::vector<double>>& rows);
FeatureStats feature_stats(const GlyphClassifier& model, const std::vector<Tensor<float>>& images);

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), clamped at 0.
// DimensionMismatch when dims differ.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

struct GridRow {
  std::string label;
  std::vector<RasterImage> images;
  std::vector<Tensor<float>> heatmaps;  // empty, or one H' x W' map per image
};

struct GridLayout {
  static constexpr int kPad = 4;
  static constexpr int kGlyphW = 5;
  static constexpr int kGlyphH = 7;
  int label_width = 0;
  int cell_height = 0;
  int cell_width = 0;
  int columns = 0;
  int width = 0;
  int height = 0;
};

// label column = 6 * longest label + kPad; each cell adds its size + kPad.
GridLayout grid_layout(const std::vector<GridRow>& rows);
// Grayscale PNG, or RGB when any row carries heatmaps (overlaid in red).
// EmptyInput on no rows, ShapeMismatch on mixed image sizes.
RasterImage render_grid(const std::vector<GridRow>& rows);
void render_grid(const std::vector<GridRow>& rows, const std::filesystem::path& path);

}  // namespace skelfont
