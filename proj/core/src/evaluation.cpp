#include "skelfont/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "skelfont/ops.hpp"
#include "skelfont/optim.hpp"

namespace skelfont {
namespace fs = std::filesystem;
using nlohmann::json;

std::vector<LabeledImage> style_samples(const fs::path& root, const Manifest& manifest,
                                        const std::string& style, int image_size) {
  std::vector<LabeledImage> out;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.style != style) continue;
    RasterImage img = to_gray(load_image(root / e.path));
    if (img.height() != image_size || img.width() != image_size) img = resize(img, image_size, image_size);
    out.push_back({e.char_id, img.pixels()});
  }
  if (out.empty()) fail(ErrorCode::kEmptyStyle, "manifest has no images of style '" + style + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Classifier

namespace {

Var<float> dense_param(ParamSet<float>& params, const std::string& path, int out, int in, Rng& rng) {
  Tensor<float> w({out, in});
  const double sd = std::sqrt(2.0 / in);
  for (float& v : w.values()) v = static_cast<float>(rng.normal() * sd);
  return params.add(path, std::move(w));
}

int flat_size(const ClassifierConfig& cfg) {
  const int s = cfg.image_size / 8;
  return 32 * s * s;
}

}  // namespace

GlyphClassifier::GlyphClassifier(std::vector<std::string> classes, const ClassifierConfig& cfg)
    : classes_(std::move(classes)), cfg_(cfg) {
  if (std::set<std::string>(classes_.begin(), classes_.end()).size() < 2) {
    fail(ErrorCode::kInsufficientClasses, "classifier needs at least two distinct classes, got " +
                                              std::to_string(classes_.size()));
  }
  if (cfg_.image_size < 8 || cfg_.image_size % 8 != 0) {
    fail(ErrorCode::kConfigError, "classifier image_size must be a positive multiple of 8");
  }
  if (cfg_.feature_dim < 1) fail(ErrorCode::kConfigError, "classifier feature_dim must be >= 1");
  Rng rng(derive_seed(cfg_.seed, hash_tag("classifier")));
  c1_ = Conv2d<float>::make(params_, "cls/c1", 1, 16, 4, 2, 1, true, rng);
  c2_ = Conv2d<float>::make(params_, "cls/c2", 16, 32, 4, 2, 1, true, rng);
  c3_ = Conv2d<float>::make(params_, "cls/c3", 32, 32, 4, 2, 1, true, rng);
  fc1_w_ = dense_param(params_, "cls/fc1/w", cfg_.feature_dim, flat_size(cfg_), rng);
  fc1_b_ = params_.add("cls/fc1/b", Tensor<float>({cfg_.feature_dim}));
  fc2_w_ = dense_param(params_, "cls/fc2/w", static_cast<int>(classes_.size()), cfg_.feature_dim, rng);
  fc2_b_ = params_.add("cls/fc2/b", Tensor<float>({static_cast<int>(classes_.size())}));
}

Var<float> GlyphClassifier::features(const Var<float>& x) const {
  Var<float> h = ops::relu(c1_(x));
  h = ops::relu(c2_(h));
  h = ops::relu(c3_(h));
  return ops::relu(ops::linear(h, fc1_w_, fc1_b_));
}

Var<float> GlyphClassifier::logits(const Var<float>& x) const {
  return ops::linear(features(x), fc2_w_, fc2_b_);
}

Tensor<float> GlyphClassifier::prepare(const Tensor<float>& img) const {
  if (img.rank() != 3 || img.dim(0) != 1) {
    fail(ErrorCode::kShapeMismatch, "classifier input must be 1 x H x W, got " + shape_string(img.shape()));
  }
  if (img.dim(1) == cfg_.image_size && img.dim(2) == cfg_.image_size) return img;
  return resize(RasterImage(img), cfg_.image_size, cfg_.image_size).pixels();
}

std::vector<double> GlyphClassifier::probabilities(const Tensor<float>& img) const {
  NoGradGuard no_grad;
  const Var<float> l = logits(Var<float>(prepare(img)));
  const auto v = l.value().values();
  const float mx = *std::max_element(v.begin(), v.end());
  std::vector<double> p(v.size());
  double z = 0;
  for (std::size_t i = 0; i < v.size(); ++i) z += p[i] = std::exp(static_cast<double>(v[i] - mx));
  for (double& x : p) x /= z;
  return p;
}

std::vector<double> GlyphClassifier::feature_vector(const Tensor<float>& img) const {
  NoGradGuard no_grad;
  const Var<float> f = features(Var<float>(prepare(img)));
  return {f.value().values().begin(), f.value().values().end()};
}

int GlyphClassifier::predict(const Tensor<float>& img) const {
  NoGradGuard no_grad;
  const Var<float> l = logits(Var<float>(prepare(img)));
  const auto v = l.value().values();
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

int GlyphClassifier::class_index(const std::string& label) const {
  const auto it = std::find(classes_.begin(), classes_.end(), label);
  if (it == classes_.end()) fail(ErrorCode::kUnknownLabel, "label '" + label + "' is not a classifier class");
  return static_cast<int>(it - classes_.begin());
}

Checkpoint GlyphClassifier::checkpoint() const {
  Checkpoint ckpt;
  ckpt.config = {{"kind", "classifier"},
                 {"classes", classes_},
                 {"image_size", cfg_.image_size},
                 {"feature_dim", cfg_.feature_dim},
                 {"epochs", cfg_.epochs},
                 {"lr", cfg_.lr},
                 {"max_shift", cfg_.max_shift},
                 {"heldout_views", cfg_.heldout_views},
                 {"seed", cfg_.seed}};
  for (const auto& p : params_.items()) ckpt.tensors.push_back({p.path, p.var.value()});
  return ckpt;
}

GlyphClassifier GlyphClassifier::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.config.value("kind", "") != "classifier") {
    fail(ErrorCode::kManifestMismatch, "checkpoint is not a classifier");
  }
  ClassifierConfig cfg;
  std::vector<std::string> classes;
  try {
    classes = ckpt.config.at("classes").get<std::vector<std::string>>();
    cfg.image_size = ckpt.config.at("image_size").get<int>();
    cfg.feature_dim = ckpt.config.at("feature_dim").get<int>();
    cfg.epochs = ckpt.config.at("epochs").get<int>();
    cfg.lr = ckpt.config.at("lr").get<double>();
    cfg.max_shift = ckpt.config.at("max_shift").get<int>();
    cfg.heldout_views = ckpt.config.at("heldout_views").get<int>();
    cfg.seed = ckpt.config.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kManifestMismatch, std::string("malformed classifier config: ") + e.what());
  }
  GlyphClassifier model(std::move(classes), cfg);
  for (const auto& p : model.params_.items()) {
    const CheckpointTensor* t = ckpt.find(p.path);
    if (!t) fail(ErrorCode::kManifestMismatch, "classifier checkpoint lacks " + p.path);
    if (t->value.shape() != p.var.shape()) {
      fail(ErrorCode::kManifestMismatch, "classifier tensor " + p.path + " has shape " +
                                             shape_string(t->value.shape()));
    }
    Var<float> v = p.var;
    v.mutable_value() = t->value;
  }
  return model;
}

Tensor<float> shift_image(const Tensor<float>& img, double dy, double dx) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor<float> out(img.shape());
  for (int k = 0; k < c; ++k) {
    const float fill = img.at(k, 0, 0);
    auto px = [&](int y, int x) { return (y < 0 || x < 0 || y >= h || x >= w) ? fill : img.at(k, y, x); };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double sy = y - dy, sx = x - dx;
        const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
        const double fy = sy - y0, fx = sx - x0;
        out.at(k, y, x) = static_cast<float>((1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
                                             fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1)));
      }
    }
  }
  return out;
}

GlyphClassifier train_classifier(const std::vector<LabeledImage>& samples, const ClassifierConfig& cfg,
                                 ClassifierReport* report) {
  std::vector<std::string> classes;
  for (const LabeledImage& s : samples) classes.push_back(s.label);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (cfg.epochs < 1 || !(cfg.lr > 0) || cfg.max_shift < 1 || cfg.heldout_views < 0) {
    fail(ErrorCode::kConfigError, "classifier needs epochs >= 1, lr > 0, max_shift >= 1, heldout_views >= 0");
  }
  GlyphClassifier model(classes, cfg);
  EnableGradGuard grad_on;

  std::vector<Tensor<float>> inputs;
  std::vector<int> labels;
  for (const LabeledImage& s : samples) {
    inputs.push_back(model.prepare(s.pixels));
    labels.push_back(model.class_index(s.label));
  }
  Adam<float> opt(model.params(), {0.9, 0.999});
  std::int64_t steps = 0;
  const auto total_steps = static_cast<std::int64_t>(inputs.size()) * cfg.epochs;
  const int span = 2 * cfg.max_shift + 1;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng(derive_seed(cfg.seed, hash_tag("cls-order"), static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order.begin(), order.end());
    for (std::size_t i : order) {
      Rng aug(derive_seed(cfg.seed, hash_tag("cls-shift"), static_cast<std::uint64_t>(steps)));
      const int dy = static_cast<int>(aug.below(span)) - cfg.max_shift;
      const int dx = static_cast<int>(aug.below(span)) - cfg.max_shift;
      model.params().zero_grad();
      const Var<float> loss =
          ops::softmax_cross_entropy(model.logits(Var<float>(shift_image(inputs[i], dy, dx))), labels[i]);
      if (!std::isfinite(loss.item())) fail(ErrorCode::kNonFiniteLoss, "classifier loss is non-finite");
      loss.backward();
      opt.step(cfg.lr * (1.0 - static_cast<double>(steps) / static_cast<double>(total_steps)));
      ++steps;
    }
  }

  if (report) {
    report->steps = steps;
    std::size_t train_ok = 0, held_ok = 0, held_n = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      train_ok += model.predict(inputs[i]) == labels[i];
      Rng held(derive_seed(cfg.seed, hash_tag("cls-heldout"), i));
      for (int v = 0; v < cfg.heldout_views; ++v) {
        const double dy = static_cast<double>(held.below(span - 1)) - cfg.max_shift + 0.5;
        const double dx = static_cast<double>(held.below(span - 1)) - cfg.max_shift + 0.5;
        held_ok += model.predict(shift_image(inputs[i], dy, dx)) == labels[i];
        ++held_n;
      }
    }
    report->train_accuracy = static_cast<double>(train_ok) / static_cast<double>(inputs.size());
    report->heldout_accuracy = held_n ? static_cast<double>(held_ok) / static_cast<double>(held_n) : 0.0;
  }
  return model;
}

double content_accuracy(const GlyphClassifier& model, const std::vector<Tensor<float>>& images,
                        const std::vector<std::string>& labels) {
  if (images.empty()) fail(ErrorCode::kEmptyInput, "content accuracy of an empty image set is undefined");
  if (images.size() != labels.size()) {
    fail(ErrorCode::kShapeMismatch, std::to_string(images.size()) + " images but " +
                                        std::to_string(labels.size()) + " labels");
  }
  std::vector<int> want;
  for (const std::string& l : labels) want.push_back(model.class_index(l));
  std::size_t ok = 0;
  for (std::size_t i = 0; i < images.size(); ++i) ok += model.predict(images[i]) == want[i];
  return static_cast<double>(ok) / static_cast<double>(images.size());
}

// ---------------------------------------------------------------------------
// Frechet distance

FeatureStats feature_stats(const std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) fail(ErrorCode::kEmptyInput, "feature statistics need at least two samples");
  const std::size_t d = rows.front().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) fail(ErrorCode::kDimensionMismatch, "feature rows differ in length");
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd centred = x.rowwise() - mu;
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(rows.size() - 1);
  FeatureStats s;
  s.dim = static_cast<int>(d);
  s.mean.assign(mu.data(), mu.data() + d);
  s.cov.resize(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      s.cov[i * d + j] = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return s;
}

FeatureStats feature_stats(const GlyphClassifier& model, const std::vector<Tensor<float>>& images) {
  std::vector<std::vector<double>> rows;
  rows.reserve(images.size());
  for (const auto& img : images) rows.push_back(model.feature_vector(img));
  return feature_stats(rows);
}

namespace {

Eigen::MatrixXd as_matrix(const FeatureStats& s) {
  const auto n = static_cast<std::size_t>(s.dim);
  if (s.mean.size() != n || s.cov.size() != n * n) {
    fail(ErrorCode::kDimensionMismatch, "feature stats storage does not match dim " + std::to_string(s.dim));
  }
  Eigen::MatrixXd m(s.dim, s.dim);
  for (int i = 0; i < s.dim; ++i) {
    for (int j = 0; j < s.dim; ++j) m(i, j) = s.cov[static_cast<std::size_t>(i) * n + j];
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    fail(ErrorCode::kInvalidArgument, "covariance is not symmetric");
  }
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  if (a.dim != b.dim) {
    fail(ErrorCode::kDimensionMismatch, "feature dims differ: " + std::to_string(a.dim) + " vs " +
                                            std::to_string(b.dim));
  }
  if (a.dim < 1) fail(ErrorCode::kDimensionMismatch, "feature dim must be >= 1");
  const Eigen::MatrixXd sa = as_matrix(a), sb = as_matrix(b);
  double mean_term = 0;
  for (int i = 0; i < a.dim; ++i) mean_term += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]);
  // (Sa Sb)^(1/2) shares its trace with (Sa^(1/2) Sb Sa^(1/2))^(1/2), which is symmetric.
  const Eigen::MatrixXd ra = psd_sqrt(sa);
  const Eigen::MatrixXd inner = ra * sb * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return std::max(0.0, mean_term + sa.trace() + sb.trace() - 2.0 * cross);
}

// ---------------------------------------------------------------------------
// Grid rendering

namespace {

// 5x7 glyphs, one byte per row, bit 4 = leftmost column.
const std::map<char, std::array<std::uint8_t, 7>>& font() {
  static const std::map<char, std::array<std::uint8_t, 7>> f = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
      {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}}, {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
  };
  return f;
}

void draw_text(RasterImage& img, const std::string& text, int top, int left) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(text[i])));
    if (ch == ' ') continue;
    auto it = font().find(ch);
    if (it == font().end()) it = font().find('?');
    for (int r = 0; r < GridLayout::kGlyphH; ++r) {
      for (int c = 0; c < GridLayout::kGlyphW; ++c) {
        if (!(it->second[r] >> (4 - c) & 1)) continue;
        const int y = top + r, x = left + static_cast<int>(i) * (GridLayout::kGlyphW + 1) + c;
        if (y < 0 || y >= img.height() || x < 0 || x >= img.width()) continue;
        for (int k = 0; k < img.channels(); ++k) img.at(k, y, x) = 0.0f;
      }
    }
  }
}

}  // namespace

GridLayout grid_layout(const std::vector<GridRow>& rows) {
  if (rows.empty()) fail(ErrorCode::kEmptyInput, "grid has no rows");
  GridLayout g;
  std::size_t longest = 0;
  for (const GridRow& r : rows) {
    longest = std::max(longest, r.label.size());
    g.columns = std::max(g.columns, static_cast<int>(r.images.size()));
    for (const RasterImage& img : r.images) {
      if (g.cell_height == 0) {
        g.cell_height = img.height();
        g.cell_width = img.width();
      } else if (img.height() != g.cell_height || img.width() != g.cell_width) {
        fail(ErrorCode::kShapeMismatch, "grid images must share one size");
      }
    }
    if (!r.heatmaps.empty() && r.heatmaps.size() != r.images.size()) {
      fail(ErrorCode::kShapeMismatch, "row '" + r.label + "' has " + std::to_string(r.heatmaps.size()) +
                                          " heatmaps for " + std::to_string(r.images.size()) + " images");
    }
  }
  if (g.columns == 0) fail(ErrorCode::kEmptyInput, "grid has no images");
  g.cell_height = std::max(g.cell_height, GridLayout::kGlyphH);
  g.label_width = static_cast<int>(longest) * (GridLayout::kGlyphW + 1) + GridLayout::kPad;
  g.width = GridLayout::kPad + g.label_width + g.columns * (g.cell_width + GridLayout::kPad);
  g.height = GridLayout::kPad + static_cast<int>(rows.size()) * (g.cell_height + GridLayout::kPad);
  return g;
}

RasterImage render_grid(const std::vector<GridRow>& rows) {
  const GridLayout g = grid_layout(rows);
  const bool color = std::any_of(rows.begin(), rows.end(), [](const GridRow& r) { return !r.heatmaps.empty(); });
  RasterImage out(color ? 3 : 1, g.height, g.width, 1.0f);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int top = GridLayout::kPad + static_cast<int>(r) * (g.cell_height + GridLayout::kPad);
    draw_text(out, rows[r].label, top + (g.cell_height - GridLayout::kGlyphH) / 2, GridLayout::kPad);
    for (std::size_t c = 0; c < rows[r].images.size(); ++c) {
      const int left = GridLayout::kPad + g.label_width + static_cast<int>(c) * (g.cell_width + GridLayout::kPad);
      const RasterImage cell = to_gray(rows[r].images[c]);
      std::optional<RasterImage> heat;
      if (!rows[r].heatmaps.empty()) {
        const Tensor<float>& h = rows[r].heatmaps[c];
        Tensor<float> h3 = h.rank() == 2 ? h.reshaped({1, h.dim(0), h.dim(1)}) : h;
        float lo = *std::min_element(h3.values().begin(), h3.values().end());
        float hi = *std::max_element(h3.values().begin(), h3.values().end());
        for (float& v : h3.values()) v = hi > lo ? (v - lo) / (hi - lo) : 0.0f;
        heat = resize(RasterImage(std::move(h3)), g.cell_height, g.cell_width);
      }
      for (int y = 0; y < cell.height(); ++y) {
        for (int x = 0; x < cell.width(); ++x) {
          const float v = std::clamp(cell.at(0, y, x), 0.0f, 1.0f);
          if (!color) {
            out.at(0, top + y, left + x) = v;
            continue;
          }
          const float a = heat ? 0.6f * std::clamp(heat->at(0, y, x), 0.0f, 1.0f) : 0.0f;
          out.at(0, top + y, left + x) = (1 - a) * v + a;
          out.at(1, top + y, left + x) = (1 - a) * v;
          out.at(2, top + y, left + x) = (1 - a) * v;
        }
      }
    }
  }
  return out;
}

void render_grid(const std::vector<GridRow>& rows, const fs::path& path) {
  save_image(render_grid(rows), path);
}

}  // namespace skelfont
