#include <gtest/gtest.h>

#include "skelfont/networks.hpp"
#include "skelfont/ops.hpp"

using namespace skelfont;

namespace {

Var<float> random_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t({1, size, size});
  for (float& v : t.values()) v = static_cast<float>(rng.uniform());
  return Var<float>(std::move(t));
}

}  // namespace

TEST(Networks, EncoderDownsamplesByFour) {
  const NetConfig cfg;
  const Generator<float> g(cfg, 1);
  const Var<float> f = encode(g.enc_i, random_image(64, 2));
  EXPECT_EQ(f.shape(), (Shape{64, 16, 16}));
  for (float v : f.value().values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Networks, EncoderOnZeroInputIsFinite) {
  const Generator<float> g(NetConfig{}, 1);
  const Var<float> f = encode(g.enc_i, Var<float>(Tensor<float>({1, 32, 32})));
  for (float v : f.value().values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Networks, GeneratorShapeAndRange) {
  const Generator<float> g(NetConfig{}, 3);
  const Var<float> out = generate(g, random_image(64, 4), random_image(64, 5));
  EXPECT_EQ(out.shape(), (Shape{1, 64, 64}));
  for (float v : out.value().values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Networks, GeneratorAtFullResolution) {
  NetConfig cfg;
  cfg.channels = 16;
  cfg.res_blocks = 1;
  const Generator<float> g(cfg, 3);
  NoGradGuard no_grad;
  EXPECT_EQ(generate(g, random_image(256, 4), random_image(256, 5)).shape(), (Shape{1, 256, 256}));
}

TEST(Networks, GeneratorIsDeterministic) {
  const Generator<float> a(NetConfig{}, 9), b(NetConfig{}, 9);
  const Var<float> x = random_image(32, 1), s = random_image(32, 2);
  EXPECT_EQ(generate(a, x, s).value(), generate(b, x, s).value());
  EXPECT_EQ(generate(a, x, s).value(), generate(a, x, s).value());
  const Generator<float> c(NetConfig{}, 10);
  EXPECT_NE(generate(a, x, s).value(), generate(c, x, s).value());
}

TEST(Networks, GeneratorExposesCams) {
  const Generator<float> g(NetConfig{}, 3);
  const GeneratorOutput<float> out = g.forward(random_image(64, 4), random_image(64, 5));
  EXPECT_EQ(out.sram_cam.heat.shape(), (Shape{1, 16, 16}));
  EXPECT_EQ(out.cram_cam.heat.shape(), (Shape{1, 16, 16}));
  EXPECT_EQ(out.sram_cam.logit.size(), 1u);
}

TEST(Networks, AblationWithoutSkeletonEncoder) {
  NetConfig cfg;
  cfg.skeleton_encoder = false;
  const Generator<float> g(cfg, 3);
  EXPECT_FALSE(g.enc_s.has_value());
  const Var<float> x = random_image(32, 4);
  // The skeleton input is ignored entirely.
  EXPECT_EQ(generate(g, x, random_image(32, 5)).value(), generate(g, x, random_image(32, 6)).value());
  EXPECT_LT(g.params().count(), Generator<float>(NetConfig{}, 3).params().count());
}

TEST(Networks, DeskGeneratorParameterBudget) {
  const Generator<float> g(NetConfig{}, 0);
  EXPECT_GT(g.params().count(), 100000u);
  EXPECT_LT(g.params().count(), 5000000u);
}

TEST(Networks, DiscriminatorPatchAndLogit) {
  const Discriminator<float> di(NetConfig{}, true, 1), ds(NetConfig{}, false, 2);
  const Var<float> x = random_image(64, 3);
  const DiscriminatorOutput<float> a = di.forward(x);
  EXPECT_EQ(a.patch.shape(), (Shape{1, 8, 8}));
  ASSERT_TRUE(a.logit.has_value());
  ASSERT_TRUE(a.heat.has_value());
  const DiscriminatorOutput<float> b = ds.forward(x);
  EXPECT_EQ(b.patch.shape(), (Shape{1, 8, 8}));
  EXPECT_FALSE(b.logit.has_value());
  EXPECT_EQ(di.forward(x).patch.value(), a.patch.value());
}

TEST(Networks, SkeletonTranslatorShapesAndGradient) {
  SkeletonTranslator<float> sg(NetConfig{}, 4);
  Var<float> x(random_image(32, 5).value(), true);
  const Var<float> s = sg_forward(sg, x);
  EXPECT_EQ(s.shape(), x.shape());
  for (float v : s.value().values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  sg.set_frozen(true);
  sg_forward(sg, x).backward();
  float gsum = 0;
  for (float v : x.grad().values()) gsum += std::abs(v);
  EXPECT_GT(gsum, 0.0f);
  for (const auto& p : sg.gen_params().items()) EXPECT_FALSE(p.var.requires_grad()) << p.path;
}

TEST(Networks, BadSpatialSize) {
  const Generator<float> g(NetConfig{}, 1);
  try {
    generate(g, random_image(30, 1), random_image(30, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadSpatialSize);
  }
  const Discriminator<float> d(NetConfig{}, true, 1);
  EXPECT_THROW(d.forward(random_image(12, 1)), Error);
  EXPECT_THROW(generate(g, random_image(32, 1), random_image(64, 2)), Error);
}

TEST(Networks, EveryParameterGroupGetsGradient) {
  NetConfig n;
  n.channels = 4;
  n.res_blocks = 1;
  Generator<double> g(n, 7, "gf");
  Rng rng(8);
  Tensor<double> xt({1, 8, 8}), st({1, 8, 8});
  for (double& v : xt.values()) v = rng.uniform();
  for (double& v : st.values()) v = rng.uniform();
  ops::mean(generate(g, Var<double>(xt), Var<double>(st))).backward();
  const std::vector<std::string> groups = {"gf/enc_i/", "gf/enc_s/", "gf/sram/head/omega", "gf/sram/theta",
                                           "gf/sram/phi", "gf/cram/head/omega", "gf/cram/theta", "gf/cram/phi",
                                           "gf/dec/"};
  for (const std::string& group : groups) {
    double norm = 0;
    for (const auto& p : g.params().items()) {
      if (p.path.rfind(group, 0) != 0 || !p.var.node()->has_grad()) continue;
      for (double v : p.var.grad().values()) norm += std::abs(v);
    }
    EXPECT_GT(norm, 0.0) << group;
  }
}
