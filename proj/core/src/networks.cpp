#include "skelfont/networks.hpp"

#include "skelfont/ops.hpp"

namespace skelfont {
namespace {

template <typename T>
void require_image(const Var<T>& img, const char* op) {
  if (img.value().rank() != 3 || img.dim(0) != 1) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": expected a 1 x H x W image, got " +
                                        shape_string(img.shape()));
  }
}

template <typename T>
void require_divisible(const Var<T>& img, int factor, const char* op) {
  if (img.dim(1) % factor != 0 || img.dim(2) % factor != 0 || img.dim(1) < factor ||
      img.dim(2) < factor) {
    fail(ErrorCode::kBadSpatialSize, std::string(op) + ": spatial size " +
                                         std::to_string(img.dim(1)) + "x" +
                                         std::to_string(img.dim(2)) + " is not a multiple of " +
                                         std::to_string(factor));
  }
}

void require_width(int channels) {
  if (channels < 4 || channels % 4 != 0) {
    fail(ErrorCode::kConfigError, "channel width must be a positive multiple of 4, got " +
                                      std::to_string(channels));
  }
}

template <typename T>
ClassifierHead<T> register_head(ParamSet<T>& params, const std::string& path, int channels) {
  ClassifierHead<T> h = ClassifierHead<T>::make(channels);
  params.adopt(path + "/omega", h.omega);
  params.adopt(path + "/bias", h.bias);
  return h;
}

template <typename T>
RefinedAttentionParams<T> register_attention(ParamSet<T>& params, const std::string& path,
                                             int channels, Rng& rng) {
  RefinedAttentionParams<T> p = RefinedAttentionParams<T>::make(channels, rng);
  params.adopt(path + "/theta", p.theta);
  params.adopt(path + "/phi", p.phi);
  return p;
}

}  // namespace

template <typename T>
Encoder<T> Encoder<T>::make(ParamSet<T>& params, const std::string& path, int channels,
                            int res_blocks, Rng& rng) {
  require_width(channels);
  Encoder e;
  e.stem = ConvNormAct<T>::make(params, path + "/stem", 1, channels / 4, 7, 1, 3, rng);
  e.down1 = ConvNormAct<T>::make(params, path + "/down1", channels / 4, channels / 2, 3, 2, 1, rng);
  e.down2 = ConvNormAct<T>::make(params, path + "/down2", channels / 2, channels, 3, 2, 1, rng);
  for (int i = 0; i < res_blocks; ++i) {
    e.blocks.push_back(
        ResidualBlock<T>::make(params, path + "/res" + std::to_string(i), channels, rng));
  }
  return e;
}

template <typename T>
Decoder<T> Decoder<T>::make(ParamSet<T>& params, const std::string& path, int channels, Rng& rng) {
  require_width(channels);
  Decoder d;
  d.up1 = ConvNormAct<T>::make(params, path + "/up1", channels, channels / 2, 3, 1, 1, rng);
  d.up2 = ConvNormAct<T>::make(params, path + "/up2", channels / 2, channels / 4, 3, 1, 1, rng);
  d.out = Conv2d<T>::make(params, path + "/out", channels / 4, 1, 7, 1, 3, true, rng, 1.0);
  return d;
}

template <typename T>
Var<T> encode(const Encoder<T>& enc, const Var<T>& img) {
  require_image(img, "encode");
  require_divisible(img, 4, "encode");
  Var<T> h = enc.down2(enc.down1(enc.stem(img)));
  for (const auto& block : enc.blocks) h = block(h);
  return h;
}

template <typename T>
Var<T> decode(const Decoder<T>& dec, const Var<T>& features) {
  Var<T> h = dec.up2(ops::upsample2x(dec.up1(ops::upsample2x(features))));
  // (tanh + 1) / 2 maps onto [0, 1].
  return ops::add_scalar(ops::scale(ops::tanh(dec.out(h)), T(0.5)), T(0.5));
}

template <typename T>
Generator<T>::Generator(const NetConfig& cfg, std::uint64_t seed, const std::string& prefix)
    : cfg_(cfg) {
  Rng rng(derive_seed(seed, hash_tag(prefix)));
  const int c = cfg.channels;
  enc_i = Encoder<T>::make(params_, prefix + "/enc_i", c, cfg.res_blocks, rng);
  if (cfg.skeleton_encoder) {
    enc_s = Encoder<T>::make(params_, prefix + "/enc_s", c, cfg.res_blocks, rng);
  }
  sram_head = register_head(params_, prefix + "/sram/head", c);
  sram_params = register_attention(params_, prefix + "/sram", c, rng);
  cram_head = register_head(params_, prefix + "/cram/head", c);
  cram_params = register_attention(params_, prefix + "/cram", c, rng);
  dec = Decoder<T>::make(params_, prefix + "/dec", c, rng);
}

template <typename T>
GeneratorOutput<T> Generator<T>::forward(const Var<T>& x_img, const Var<T>& x_skel) const {
  require_image(x_img, "generate");
  require_image(x_skel, "generate");
  if (x_img.shape() != x_skel.shape()) {
    fail(ErrorCode::kShapeMismatch, "generate: image " + shape_string(x_img.shape()) +
                                        " and skeleton " + shape_string(x_skel.shape()) + " differ");
  }
  GeneratorOutput<T> out;
  const Var<T> fi = encode(enc_i, x_img);
  RefinedOutput<T> r1 = sram_full(fi, sram_head, sram_params);
  const Var<T> fs = enc_s ? encode(*enc_s, x_skel) : r1.refined;
  RefinedOutput<T> r2 = cram_full(r1.refined, fs, cram_head, cram_params);
  out.sram_cam = std::move(r1.cam);
  out.cram_cam = std::move(r2.cam);
  out.image = decode(dec, r2.refined);
  return out;
}

template <typename T>
std::pair<Var<T>, Var<T>> Generator<T>::classify(const Var<T>& x_img) const {
  const Var<T> fi = encode(enc_i, x_img);
  RefinedOutput<T> r1 = sram_full(fi, sram_head, sram_params);
  return {r1.cam.logit, cam_weight(r1.refined, cram_head).logit};
}

template <typename T>
Var<T> generate(const Generator<T>& g, const Var<T>& x_img, const Var<T>& x_skel) {
  return g.forward(x_img, x_skel).image;
}

template <typename T>
Discriminator<T>::Discriminator(const NetConfig& cfg, bool attention, std::uint64_t seed,
                                const std::string& prefix)
    : attention_(attention) {
  Rng rng(derive_seed(seed, hash_tag(prefix)));
  const int c = cfg.disc_channels;
  if (c < 1) fail(ErrorCode::kConfigError, "disc_channels must be >= 1");
  c1_ = Conv2d<T>::make(params_, prefix + "/c1", 1, c, 4, 2, 1, true, rng);
  c2_ = ConvNormAct<T>::make(params_, prefix + "/c2", c, 2 * c, 4, 2, 1, rng, false);
  c3_ = ConvNormAct<T>::make(params_, prefix + "/c3", 2 * c, 4 * c, 4, 2, 1, rng, false);
  if (attention_) {
    head_ = register_head(params_, prefix + "/sram/head", 4 * c);
    attn_ = register_attention(params_, prefix + "/sram", 4 * c, rng);
  }
  out_ = Conv2d<T>::make(params_, prefix + "/out", 4 * c, 1, 3, 1, 1, true, rng, 1.0);
}

template <typename T>
DiscriminatorOutput<T> Discriminator<T>::forward(const Var<T>& img) const {
  require_image(img, "discriminate");
  require_divisible(img, 8, "discriminate");
  const T slope = T(0.2);
  Var<T> h = ops::leaky_relu(c1_(img), slope);
  h = ops::leaky_relu(c2_(h), slope);
  h = ops::leaky_relu(c3_(h), slope);
  DiscriminatorOutput<T> out;
  if (attention_) {
    RefinedOutput<T> r = sram_full(h, head_, attn_);
    out.logit = r.cam.logit;
    out.heat = r.cam.heat;
    h = r.refined;
  }
  out.patch = out_(h);
  return out;
}

template <typename T>
DiscriminatorOutput<T> discriminate(const Discriminator<T>& d, const Var<T>& img) {
  return d.forward(img);
}

template <typename T>
PlainGenerator<T> PlainGenerator<T>::make(ParamSet<T>& params, const std::string& path,
                                          int channels, int res_blocks, Rng& rng) {
  return {Encoder<T>::make(params, path + "/enc", channels, res_blocks, rng),
          Decoder<T>::make(params, path + "/dec", channels, rng)};
}

template <typename T>
SkeletonTranslator<T>::SkeletonTranslator(const NetConfig& cfg, std::uint64_t seed,
                                          const std::string& prefix) {
  Rng rng(derive_seed(seed, hash_tag(prefix)));
  to_skel = PlainGenerator<T>::make(gen_params_, prefix + "/to_skel", cfg.sg_channels,
                                    cfg.res_blocks, rng);
  to_img = PlainGenerator<T>::make(gen_params_, prefix + "/to_img", cfg.sg_channels,
                                   cfg.res_blocks, rng);
  d_skel.emplace(cfg, false, seed, prefix + "/d_skel");
  d_img.emplace(cfg, false, seed, prefix + "/d_img");
  disc_params_.append(d_skel->params());
  disc_params_.append(d_img->params());
}

template <typename T>
void SkeletonTranslator<T>::set_frozen(bool frozen) {
  frozen_ = frozen;
  gen_params_.set_requires_grad(!frozen);
  disc_params_.set_requires_grad(!frozen);
}

template <typename T>
Var<T> sg_forward(const SkeletonTranslator<T>& sg, const Var<T>& img) {
  return sg.to_skel(img);
}

#define SKELFONT_INSTANTIATE_NETWORKS(T)                                                  \
  template struct Encoder<T>;                                                            \
  template struct Decoder<T>;                                                            \
  template Var<T> encode(const Encoder<T>&, const Var<T>&);                              \
  template Var<T> decode(const Decoder<T>&, const Var<T>&);                              \
  template class Generator<T>;                                                           \
  template Var<T> generate(const Generator<T>&, const Var<T>&, const Var<T>&);           \
  template class Discriminator<T>;                                                       \
  template DiscriminatorOutput<T> discriminate(const Discriminator<T>&, const Var<T>&);  \
  template struct PlainGenerator<T>;                                                     \
  template class SkeletonTranslator<T>;                                                  \
  template Var<T> sg_forward(const SkeletonTranslator<T>&, const Var<T>&);

SKELFONT_INSTANTIATE_NETWORKS(float)
SKELFONT_INSTANTIATE_NETWORKS(double)

}  // namespace skelfont
