#include <gtest/gtest.h>

#include <cmath>

#include "skelfont/losses.hpp"
#include "skelfont/ops.hpp"

using namespace skelfont;

namespace {

Var<double> constant_image(int h, int w, double v) { return Var<double>(Tensor<double>({1, h, w}, v)); }

Var<double> random_image(int h, int w, Rng& rng) {
  Tensor<double> t({1, h, w});
  for (double& v : t.values()) v = rng.uniform();
  return Var<double>(std::move(t));
}

NetConfig tiny_net() {
  NetConfig n;
  n.channels = 4;
  n.res_blocks = 1;
  n.disc_channels = 2;
  n.sg_channels = 4;
  return n;
}

}  // namespace

TEST(L1Pixel, Examples) {
  Rng rng(1);
  const Var<double> a = random_image(4, 4, rng);
  EXPECT_EQ(l1_pixel(a, a).item(), 0.0);
  EXPECT_EQ(l1_pixel(constant_image(3, 3, 1), constant_image(3, 3, 0)).item(), 1.0);
  EXPECT_EQ(l1_pixel(constant_image(3, 3, 0.25), constant_image(3, 3, 0.75)).item(), 0.5);
  EXPECT_THROW(l1_pixel(constant_image(3, 3, 0), constant_image(3, 4, 0)), Error);
}

TEST(L1Pixel, MetricProperties) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const Var<double> a = random_image(5, 5, rng), b = random_image(5, 5, rng), c = random_image(5, 5, rng);
    const double ab = l1_pixel(a, b).item(), ba = l1_pixel(b, a).item();
    EXPECT_GE(ab, 0.0);
    EXPECT_EQ(ab, ba);
    EXPECT_LE(ab, l1_pixel(a, c).item() + l1_pixel(c, b).item() + 1e-12);
  }
}

TEST(ClsLoss, ClosedForms) {
  auto logit = [](double v) { return Var<double>(Tensor<double>({1}, v)); };
  EXPECT_NEAR(cls_loss(logit(0), Domain::kSource).item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(cls_loss(logit(0), Domain::kTarget).item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(cls_loss(logit(2), Domain::kTarget).item(), std::log1p(std::exp(-2.0)), 1e-12);
  EXPECT_NEAR(cls_loss(logit(2), Domain::kTarget).item(), 0.1269, 5e-5);
  EXPECT_LT(cls_loss(logit(40), Domain::kTarget).item(), 1e-15);
  EXPECT_LT(cls_loss(logit(-40), Domain::kSource).item(), 1e-15);
  EXPECT_NEAR(cls_loss(logit(-800), Domain::kTarget).item(), 800.0, 1e-9);
}

TEST(AdvFromScores, LsganExamples) {
  const Var<double> ones(Tensor<double>({1, 2, 2}, 1.0));
  const Var<double> zeros(Tensor<double>({1, 2, 2}, 0.0));
  const Var<double> half(Tensor<double>({1, 2, 2}, 0.5));
  EXPECT_EQ(adv_from_scores(ones, zeros, Side::kDiscriminator, AdvForm::kLsgan).item(), 0.0);
  EXPECT_EQ(adv_from_scores(half, half, Side::kDiscriminator, AdvForm::kLsgan).item(), 0.5);
  EXPECT_EQ(adv_from_scores(Var<double>(), ones, Side::kGenerator, AdvForm::kLsgan).item(), 0.0);
  EXPECT_EQ(adv_from_scores(Var<double>(), zeros, Side::kGenerator, AdvForm::kLsgan).item(), 1.0);
}

TEST(AdvFromScores, BceForm) {
  const Var<double> zeros(Tensor<double>({1, 2, 2}, 0.0));
  EXPECT_NEAR(adv_from_scores(zeros, zeros, Side::kDiscriminator, AdvForm::kBce).item(), 2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(adv_from_scores(Var<double>(), zeros, Side::kGenerator, AdvForm::kBce).item(), std::log(2.0), 1e-12);
  EXPECT_EQ(parse_adv_form("bce"), AdvForm::kBce);
  EXPECT_THROW(parse_adv_form("hinge"), Error);
}

TEST(TotalObjective, AllZero) {
  EXPECT_EQ(total_objective({}, LossWeights{}).total, 0.0);
}

TEST(TotalObjective, DefaultWeightsExample) {
  LossBreakdown p;
  p.pix = 1;
  p.cycle = 1;
  p.cls = 1;
  p.adv_i = 1;
  const LossWeights w;
  EXPECT_EQ(w.lambda1, 5.0);
  EXPECT_EQ(w.lambda2, 10.0);
  EXPECT_EQ(w.lambda3, 100.0);
  EXPECT_EQ(w.lambda4, 10.0);
  EXPECT_EQ(total_objective(p, w).total, 125.0);
}

TEST(TotalObjective, LinearInWeights) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    LossBreakdown p;
    p.pix = rng.uniform();
    p.sc = rng.uniform();
    p.cycle = rng.uniform();
    p.cls = rng.uniform();
    p.adv_i = rng.uniform();
    p.adv_s = rng.uniform();
    LossWeights a{rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10)};
    LossWeights b{rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10)};
    const double s = rng.uniform(0, 3);
    const LossWeights sum{a.lambda1 + s * b.lambda1, a.lambda2 + s * b.lambda2, a.lambda3 + s * b.lambda3,
                          a.lambda4 + s * b.lambda4};
    const double lhs = total_objective(p, sum).total;
    const double rhs = total_objective(p, a).total + s * total_objective(p, b).total;
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
    const double hand = a.lambda1 * (p.adv_i + p.adv_s) + a.lambda2 * p.cycle + a.lambda3 * p.cls +
                        a.lambda4 * (p.pix + p.sc);
    EXPECT_DOUBLE_EQ(total_objective(p, a).total, hand);
  }
}

TEST(TotalObjective, NonFiniteNamesTheTerm) {
  LossBreakdown p;
  p.cycle = std::nan("");
  try {
    total_objective(p, LossWeights{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteLoss);
    EXPECT_NE(std::string(e.what()).find("cycle"), std::string::npos);
  }
  p.cycle = 0;
  p.adv_s = INFINITY;
  EXPECT_THROW(total_objective(p, LossWeights{}), Error);
}

TEST(LossWeights, Validation) {
  EXPECT_NO_THROW(LossWeights{}.validate());
  EXPECT_THROW((LossWeights{-1, 10, 100, 10}.validate()), Error);
  EXPECT_THROW((LossWeights{5, NAN, 100, 10}.validate()), Error);
}

TEST(SkeletonConsistency, Examples) {
  const SkeletonTranslator<double> sg(tiny_net(), 3);
  Rng rng(4);
  const Var<double> a = random_image(8, 8, rng), b = random_image(8, 8, rng);
  EXPECT_EQ(skeleton_consistency(sg, a, a).item(), 0.0);
  const double oracle = l1_pixel(sg_forward(sg, a), sg_forward(sg, b)).item();
  EXPECT_NEAR(skeleton_consistency(sg, a, b).item(), oracle, 1e-12);
}

TEST(SkeletonConsistency, ConstantTranslatorCollapses) {
  SkeletonTranslator<double> sg(tiny_net(), 5);
  // Zero the final conv weights of to_skel so its output ignores the input.
  sg.to_skel.dec.out.weight.mutable_value().fill(0.0);
  Rng rng(6);
  EXPECT_EQ(skeleton_consistency(sg, random_image(8, 8, rng), random_image(8, 8, rng)).item(), 0.0);
}

TEST(SkeletonConsistency, TargetBranchCarriesNoGradient) {
  const SkeletonTranslator<double> sg(tiny_net(), 3);
  Rng rng(7);
  Var<double> gen(random_image(8, 8, rng).value(), true);
  Var<double> tgt(random_image(8, 8, rng).value(), true);
  skeleton_consistency(sg, gen, tgt).backward();
  double gsum = 0;
  for (double v : tgt.grad().values()) gsum += std::abs(v);
  EXPECT_EQ(gsum, 0.0);
  double gen_sum = 0;
  for (double v : gen.grad().values()) gen_sum += std::abs(v);
  EXPECT_GT(gen_sum, 0.0);
}

TEST(CycleLoss, MatchesHandComposition) {
  const NetConfig n = tiny_net();
  const Generator<double> gf(n, 11, "gf"), gb(n, 12, "gb");
  const SkeletonTranslator<double> sg(n, 13);
  Rng rng(8);
  const Var<double> x = random_image(8, 8, rng), xs = random_image(8, 8, rng);
  const Var<double> y = random_image(8, 8, rng), ys = random_image(8, 8, rng);
  const Var<double> fy = generate(gf, x, xs);
  const Var<double> fx = generate(gb, y, ys);
  const double hand = l1_pixel(generate(gb, fy, sg_forward(sg, fy)), x).item() +
                      l1_pixel(generate(gf, fx, sg_forward(sg, fx)), y).item();
  EXPECT_NEAR(cycle_loss(gf, gb, sg, x, xs, y, ys).item(), hand, 1e-12);
}

TEST(AdvSkeleton, ReducesToAdvImageOnTranslatorOutputs) {
  const NetConfig n = tiny_net();
  const Discriminator<double> ds(n, false, 21, "ds");
  const SkeletonTranslator<double> sg(n, 22);
  Rng rng(9);
  const Var<double> real = random_image(8, 8, rng), fake = random_image(8, 8, rng);
  for (Side side : {Side::kGenerator, Side::kDiscriminator}) {
    const double want = adv_image(ds, sg_forward(sg, real), sg_forward(sg, fake), side).item();
    EXPECT_NEAR(adv_skeleton(ds, sg, real, fake, side).item(), want, 1e-12);
  }
  // Identical inputs share a score map s: D side is mean((s-1)^2) + mean(s^2).
  const Var<double> s = ds.forward(sg_forward(sg, real)).patch;
  double a = 0, b = 0;
  for (double v : s.value().values()) {
    a += (v - 1) * (v - 1) / static_cast<double>(s.size());
    b += v * v / static_cast<double>(s.size());
  }
  EXPECT_NEAR(adv_skeleton(ds, sg, real, real, Side::kDiscriminator).item(), a + b, 1e-12);
}

TEST(AdvImage, DiscriminatorSideDetachesFake) {
  const NetConfig n = tiny_net();
  const Discriminator<double> d(n, true, 31, "di");
  Rng rng(10);
  Var<double> fake(random_image(8, 8, rng).value(), true);
  adv_image(d, random_image(8, 8, rng), fake, Side::kDiscriminator).backward();
  for (double v : fake.grad().values()) EXPECT_EQ(v, 0.0);
}
