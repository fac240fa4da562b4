#pragma once

// Finite-difference checks of every differentiable building block on a C=4,
// 8x8 configuration. Shared by the unit suite and the acceptance runner.

#include <string>
#include <vector>

#include "oracles.hpp"
#include "skelfont/losses.hpp"
#include "skelfont/ops.hpp"

namespace oracle {

struct GradCase {
  std::string name;
  GradCheck result;
};

namespace detail {

inline skelfont::Var<double> random_var(skelfont::Shape shape, skelfont::Rng& rng, bool grad, double lo = -1,
                                        double hi = 1) {
  skelfont::Tensor<double> t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return skelfont::Var<double>(std::move(t), grad);
}

// Random fixed projection to a scalar so every output entry matters.
inline skelfont::Var<double> probe(const skelfont::Var<double>& v, const skelfont::Var<double>& w) {
  return skelfont::ops::sum(skelfont::ops::mul(v, w));
}

inline std::vector<std::pair<std::string, skelfont::Var<double>>> named(const skelfont::ParamSet<double>& ps,
                                                                        const std::string& prefix) {
  std::vector<std::pair<std::string, skelfont::Var<double>>> out;
  for (const auto& p : ps.items()) out.emplace_back(prefix + p.path, p.var);
  return out;
}

}  // namespace detail

inline skelfont::NetConfig grad_net() {
  skelfont::NetConfig n;
  n.channels = 4;
  n.res_blocks = 1;
  n.disc_channels = 2;
  n.sg_channels = 4;
  return n;
}

inline std::vector<GradCase> run_grad_cases(std::uint64_t seed = 17, double h = 1e-4) {
  using namespace skelfont;
  using detail::probe;
  using detail::random_var;
  using Inputs = std::vector<std::pair<std::string, Var<double>>>;
  Rng rng(seed);
  std::vector<GradCase> out;
  constexpr int C = 4, H = 8;

  // Attention blocks on a C x 8 x 8 feature map.
  ClassifierHead<double> head{random_var({C}, rng, true), random_var({1}, rng, true)};
  RefinedAttentionParams<double> att = RefinedAttentionParams<double>::make(C, rng);
  att.theta = random_var(att.theta.shape(), rng, true);
  att.phi = random_var(att.phi.shape(), rng, true);
  const Var<double> fi = random_var({C, H, H}, rng, true);
  const Var<double> fs = random_var({C, H, H}, rng, true);
  const Var<double> w_map = random_var({C, H, H}, rng, false);
  const Var<double> w_heat = random_var({1, H, H}, rng, false);
  const Var<double> w_att = random_var({H * H, H * H}, rng, false);

  out.push_back({"cam_weight", grad_check(
                                   [&] {
                                     const CamOutput<double> c = cam_weight(fi, head);
                                     return ops::add(ops::add(probe(c.weighted, w_map), probe(c.heat, w_heat)),
                                                     c.logit);
                                   },
                                   Inputs{{"F", fi}, {"omega", head.omega}, {"bias", head.bias}}, 24, h)});
  out.push_back({"affinity", grad_check([&] { return probe(affinity(fi, fs, att), w_att); },
                                        Inputs{{"Fq", fi}, {"Fk", fs}, {"theta", att.theta}, {"phi", att.phi}}, 24, h)});
  out.push_back({"sram", grad_check([&] { return probe(sram(fi, head, att), w_map); },
                                    Inputs{{"F", fi}, {"omega", head.omega}, {"theta", att.theta}, {"phi", att.phi}}, 24, h)});
  out.push_back({"cram", grad_check([&] { return probe(cram(fi, fs, head, att), w_map); },
                                    Inputs{{"Fi", fi},
                                           {"Fs", fs},
                                           {"omega", head.omega},
                                           {"theta", att.theta},
                                           {"phi", att.phi}},
                                    24, h)});

  // Networks and losses on 1 x 8 x 8 images.
  const NetConfig net = grad_net();
  const Generator<double> gf(net, derive_seed(seed, 1), "gf");
  const Generator<double> gb(net, derive_seed(seed, 2), "gb");
  SkeletonTranslator<double> sg(net, derive_seed(seed, 3));
  const Discriminator<double> di(net, true, derive_seed(seed, 4), "di");
  const Discriminator<double> ds(net, false, derive_seed(seed, 5), "ds");
  const Var<double> x = random_var({1, H, H}, rng, true, 0, 1);
  const Var<double> xs = random_var({1, H, H}, rng, true, 0, 1);
  const Var<double> y = random_var({1, H, H}, rng, false, 0, 1);
  const Var<double> ys = random_var({1, H, H}, rng, false, 0, 1);
  const Var<double> w_img = random_var({1, H, H}, rng, false);

  Inputs gen_inputs = detail::named(gf.params(), "gf/");
  gen_inputs.emplace_back("x_img", x);
  gen_inputs.emplace_back("x_skel", xs);
  out.push_back({"generate", grad_check([&] { return probe(generate(gf, x, xs), w_img); }, gen_inputs, 4, h)});

  Inputs gf_x = detail::named(gf.params(), "gf/");
  gf_x.emplace_back("x_img", x);
  out.push_back({"l1_pixel", grad_check([&] { return l1_pixel(generate(gf, x, xs), y); }, gf_x, 3, h)});

  // The target branch is a stop-gradient, so only the generated image is checked.
  out.push_back({"skeleton_consistency", grad_check([&] { return skeleton_consistency(sg, x, y); }, {{"x_img", x}}, 24, h)});

  Inputs both = detail::named(gf.params(), "gf/");
  for (auto& p : detail::named(gb.params(), "gb/")) both.push_back(p);
  both.emplace_back("x_img", x);
  out.push_back({"cycle_loss", grad_check([&] { return cycle_loss(gf, gb, sg, x, xs, y, ys); }, both, 2, h)});

  Inputs cls_in = detail::named(gf.params(), "gf/");
  out.push_back({"cls_loss", grad_check(
                                 [&] {
                                   const GeneratorOutput<double> o = gf.forward(x, xs);
                                   return ops::add(cls_loss(o.sram_cam.logit, Domain::kSource),
                                                   cls_loss(o.cram_cam.logit, Domain::kTarget));
                                 },
                                 cls_in, 3, h)});

  // Discriminators downsample by 8; at 8x8 their last norm sees a 1x1 map and
  // emits exactly beta = 0, a leaky-ReLU kink. 16x16 keeps every layer smooth.
  const Var<double> x16 = random_var({1, 2 * H, 2 * H}, rng, true, 0, 1);
  const Var<double> xs16 = random_var({1, 2 * H, 2 * H}, rng, false, 0, 1);
  const Var<double> y16 = random_var({1, 2 * H, 2 * H}, rng, false, 0, 1);

  Inputs di_gen = detail::named(gf.params(), "gf/");
  out.push_back({"adv_image/generator",
                 grad_check([&] { return adv_image(di, y16, generate(gf, x16, xs16), Side::kGenerator); }, di_gen, 3, h)});
  Inputs di_disc = detail::named(di.params(), "di/");
  out.push_back({"adv_image/discriminator",
                 grad_check([&] { return adv_image(di, y16, x16, Side::kDiscriminator); }, di_disc, 3, h)});
  out.push_back({"adv_image/bce",
                 grad_check([&] { return adv_image(di, y16, x16, Side::kDiscriminator, AdvForm::kBce); }, di_disc, 3, h)});

  Inputs ds_gen = detail::named(sg.gen_params(), "sg/");
  ds_gen.emplace_back("x_img", x16);
  out.push_back({"adv_skeleton/generator",
                 grad_check([&] { return adv_skeleton(ds, sg, y16, x16, Side::kGenerator); }, ds_gen, 3, h)});
  Inputs ds_disc = detail::named(ds.params(), "ds/");
  out.push_back({"adv_skeleton/discriminator",
                 grad_check([&] { return adv_skeleton(ds, sg, y16, x16, Side::kDiscriminator); }, ds_disc, 3, h)});
  return out;
}

}  // namespace oracle
