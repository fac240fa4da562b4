#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skelfont/attention.hpp"
#include "skelfont/nn.hpp"

namespace skelfont {

struct NetConfig {
  int channels = 64;        // bottleneck width C
  int res_blocks = 4;
  int disc_channels = 16;   // first discriminator width; doubles twice
  int sg_channels = 32;     // bottleneck width of the skeleton translator
  bool skeleton_encoder = true;  // false: CRAM keys come from the image features
};

// stem 7x7 -> C/4, two stride-2 3x3 convs to C/2 and C, then residual blocks.
template <typename T>
struct Encoder {
  ConvNormAct<T> stem;
  ConvNormAct<T> down1;
  ConvNormAct<T> down2;
  std::vector<ResidualBlock<T>> blocks;

  static Encoder make(ParamSet<T>& params, const std::string& path, int channels, int res_blocks,
                      Rng& rng);
};

// Two nearest-upsample + 3x3 conv blocks, then a 7x7 output conv mapped to [0, 1].
template <typename T>
struct Decoder {
  ConvNormAct<T> up1;
  ConvNormAct<T> up2;
  Conv2d<T> out;

  static Decoder make(ParamSet<T>& params, const std::string& path, int channels, Rng& rng);
};

template <typename T>
Var<T> encode(const Encoder<T>& enc, const Var<T>& img);
template <typename T>
Var<T> decode(const Decoder<T>& dec, const Var<T>& features);

template <typename T>
struct GeneratorOutput {
  Var<T> image;
  CamOutput<T> sram_cam;  // CAM of the image features
  CamOutput<T> cram_cam;  // CAM of the SRAM-refined features
};

// Attention-fused generator: sram(E_i(x)) -> cram(., E_s(s)) -> decoder.
template <typename T>
class Generator {
 public:
  Generator(const NetConfig& cfg, std::uint64_t seed, const std::string& prefix = "g");
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;
  Generator(Generator&&) = default;
  Generator& operator=(Generator&&) = default;

  GeneratorOutput<T> forward(const Var<T>& x_img, const Var<T>& x_skel) const;
  // Domain logits of both CAM heads for an input image, without decoding.
  std::pair<Var<T>, Var<T>> classify(const Var<T>& x_img) const;

  const NetConfig& config() const { return cfg_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

  Encoder<T> enc_i;
  std::optional<Encoder<T>> enc_s;
  ClassifierHead<T> sram_head;
  RefinedAttentionParams<T> sram_params;
  ClassifierHead<T> cram_head;
  RefinedAttentionParams<T> cram_params;
  Decoder<T> dec;

 private:
  NetConfig cfg_;
  ParamSet<T> params_;
};

template <typename T>
Var<T> generate(const Generator<T>& g, const Var<T>& x_img, const Var<T>& x_skel);

template <typename T>
struct DiscriminatorOutput {
  Var<T> patch;                  // 1 x H/8 x W/8 realness scores
  std::optional<Var<T>> logit;   // domain logit, attention discriminators only
  std::optional<Var<T>> heat;    // CAM heatmap, attention discriminators only
};

// Three 4x4 stride-2 convs (c, 2c, 4c) with leaky ReLU, optional SRAM, 3x3 output conv.
template <typename T>
class Discriminator {
 public:
  Discriminator(const NetConfig& cfg, bool attention, std::uint64_t seed,
                const std::string& prefix = "d");
  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;
  Discriminator(Discriminator&&) = default;
  Discriminator& operator=(Discriminator&&) = default;

  DiscriminatorOutput<T> forward(const Var<T>& img) const;
  bool has_attention() const { return attention_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

 private:
  bool attention_;
  Conv2d<T> c1_;
  ConvNormAct<T> c2_;
  ConvNormAct<T> c3_;
  ClassifierHead<T> head_;
  RefinedAttentionParams<T> attn_;
  Conv2d<T> out_;
  ParamSet<T> params_;
};

template <typename T>
DiscriminatorOutput<T> discriminate(const Discriminator<T>& d, const Var<T>& img);

// Encoder-decoder without attention.
template <typename T>
struct PlainGenerator {
  Encoder<T> enc;
  Decoder<T> dec;

  static PlainGenerator make(ParamSet<T>& params, const std::string& path, int channels,
                             int res_blocks, Rng& rng);
  Var<T> operator()(const Var<T>& x) const { return decode(dec, encode(enc, x)); }
};

// Cycle pair image <-> skeleton with one patch discriminator per domain.
template <typename T>
class SkeletonTranslator {
 public:
  SkeletonTranslator(const NetConfig& cfg, std::uint64_t seed, const std::string& prefix = "sg");
  SkeletonTranslator(const SkeletonTranslator&) = delete;
  SkeletonTranslator& operator=(const SkeletonTranslator&) = delete;
  SkeletonTranslator(SkeletonTranslator&&) = default;
  SkeletonTranslator& operator=(SkeletonTranslator&&) = default;

  // Generator parameters (to_skel, to_img) and discriminator parameters.
  ParamSet<T>& gen_params() { return gen_params_; }
  ParamSet<T>& disc_params() { return disc_params_; }
  const ParamSet<T>& gen_params() const { return gen_params_; }
  const ParamSet<T>& disc_params() const { return disc_params_; }

  // Frozen translators contribute no parameter gradients; gradients still flow
  // to their inputs.
  void set_frozen(bool frozen);
  bool frozen() const { return frozen_; }

  PlainGenerator<T> to_skel;
  PlainGenerator<T> to_img;
  std::optional<Discriminator<T>> d_skel;
  std::optional<Discriminator<T>> d_img;

 private:
  ParamSet<T> gen_params_;
  ParamSet<T> disc_params_;
  bool frozen_ = false;
};

template <typename T>
Var<T> sg_forward(const SkeletonTranslator<T>& sg, const Var<T>& img);

}  // namespace skelfont
