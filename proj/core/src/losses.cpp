#include "skelfont/losses.hpp"

#include <cmath>

#include "skelfont/ops.hpp"

namespace skelfont {

void LossWeights::validate() const {
  const double all[] = {lambda1, lambda2, lambda3, lambda4};
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(all[i]) || all[i] < 0) {
      fail(ErrorCode::kConfigError,
           "lambda" + std::to_string(i + 1) + " must be finite and >= 0, got " +
               std::to_string(all[i]));
    }
  }
}

std::string_view adv_form_name(AdvForm form) { return form == AdvForm::kBce ? "bce" : "lsgan"; }

AdvForm parse_adv_form(std::string_view name) {
  if (name == "lsgan") return AdvForm::kLsgan;
  if (name == "bce") return AdvForm::kBce;
  fail(ErrorCode::kConfigError, "adv_form must be lsgan or bce, got '" + std::string(name) + "'");
}

LossBreakdown total_objective(const LossBreakdown& parts, const LossWeights& w) {
  const std::pair<const char*, double> named[] = {{"pix", parts.pix},     {"sc", parts.sc},
                                                  {"cycle", parts.cycle}, {"cls", parts.cls},
                                                  {"adv_i", parts.adv_i}, {"adv_s", parts.adv_s}};
  std::string bad;
  for (const auto& [name, v] : named) {
    if (!std::isfinite(v)) bad += std::string(bad.empty() ? "" : ", ") + name + "=" + std::to_string(v);
  }
  if (!bad.empty()) fail(ErrorCode::kNonFiniteLoss, "non-finite loss terms: " + bad);
  LossBreakdown out = parts;
  out.total = w.lambda1 * (parts.adv_i + parts.adv_s) + w.lambda2 * parts.cycle +
              w.lambda3 * parts.cls + w.lambda4 * (parts.pix + parts.sc);
  if (!std::isfinite(out.total)) fail(ErrorCode::kNonFiniteLoss, "non-finite weighted total");
  return out;
}

template <typename T>
Var<T> l1_pixel(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kShapeMismatch,
         "l1_pixel: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  return ops::mean(ops::abs(ops::sub(a, b)));
}

template <typename T>
Var<T> skeleton_consistency(const SkeletonTranslator<T>& sg, const Var<T>& gen_out,
                            const Var<T>& target) {
  if (gen_out.shape() != target.shape()) {
    fail(ErrorCode::kShapeMismatch, "skeleton_consistency: " + shape_string(gen_out.shape()) +
                                        " vs " + shape_string(target.shape()));
  }
  return l1_pixel(sg_forward(sg, gen_out), sg_forward(sg, target.detach()).detach());
}

template <typename T>
Var<T> cycle_loss(const Generator<T>& gf, const Generator<T>& gb, const SkeletonTranslator<T>& sg,
                  const Var<T>& x_img, const Var<T>& x_skel, const Var<T>& y_img,
                  const Var<T>& y_skel) {
  const Var<T> fake_y = generate(gf, x_img, x_skel);
  const Var<T> rec_x = generate(gb, fake_y, sg_forward(sg, fake_y));
  const Var<T> fake_x = generate(gb, y_img, y_skel);
  const Var<T> rec_y = generate(gf, fake_x, sg_forward(sg, fake_x));
  return ops::add(l1_pixel(rec_x, x_img), l1_pixel(rec_y, y_img));
}

template <typename T>
Var<T> cls_loss(const Var<T>& logit, Domain label) {
  return ops::bce_with_logits(logit, static_cast<T>(static_cast<int>(label)));
}

template <typename T>
Var<T> adv_from_scores(const Var<T>& real, const Var<T>& fake, Side side, AdvForm form) {
  if (side == Side::kGenerator) {
    return form == AdvForm::kLsgan ? ops::mean_squared_to(fake, T(1))
                                   : ops::bce_with_logits(fake, T(1));
  }
  if (form == AdvForm::kLsgan) {
    return ops::add(ops::mean_squared_to(real, T(1)), ops::mean_squared_to(fake, T(0)));
  }
  return ops::add(ops::bce_with_logits(real, T(1)), ops::bce_with_logits(fake, T(0)));
}

template <typename T>
Var<T> adv_image(const Discriminator<T>& d, const Var<T>& real, const Var<T>& fake, Side side,
                 AdvForm form) {
  if (side == Side::kGenerator) return adv_from_scores(Var<T>(), d.forward(fake).patch, side, form);
  if (real.shape() != fake.shape()) {
    fail(ErrorCode::kShapeMismatch,
         "adv_image: real " + shape_string(real.shape()) + " vs fake " + shape_string(fake.shape()));
  }
  return adv_from_scores(d.forward(real).patch, d.forward(fake.detach()).patch, side, form);
}

template <typename T>
Var<T> adv_skeleton(const Discriminator<T>& d_s, const SkeletonTranslator<T>& sg,
                    const Var<T>& real_target, const Var<T>& gen_out, Side side, AdvForm form) {
  if (real_target.shape() != gen_out.shape()) {
    fail(ErrorCode::kShapeMismatch, "adv_skeleton: real " + shape_string(real_target.shape()) +
                                        " vs fake " + shape_string(gen_out.shape()));
  }
  const Var<T> fake = sg_forward(sg, gen_out);
  if (side == Side::kGenerator) return adv_image(d_s, Var<T>(), fake, side, form);
  return adv_image(d_s, sg_forward(sg, real_target.detach()).detach(), fake, side, form);
}

#define SKELFONT_INSTANTIATE_LOSSES(T)                                                          \
  template Var<T> l1_pixel(const Var<T>&, const Var<T>&);                                      \
  template Var<T> skeleton_consistency(const SkeletonTranslator<T>&, const Var<T>&,            \
                                       const Var<T>&);                                         \
  template Var<T> cycle_loss(const Generator<T>&, const Generator<T>&,                         \
                             const SkeletonTranslator<T>&, const Var<T>&, const Var<T>&,       \
                             const Var<T>&, const Var<T>&);                                    \
  template Var<T> cls_loss(const Var<T>&, Domain);                                             \
  template Var<T> adv_from_scores(const Var<T>&, const Var<T>&, Side, AdvForm);                \
  template Var<T> adv_image(const Discriminator<T>&, const Var<T>&, const Var<T>&, Side,       \
                            AdvForm);                                                          \
  template Var<T> adv_skeleton(const Discriminator<T>&, const SkeletonTranslator<T>&,          \
                               const Var<T>&, const Var<T>&, Side, AdvForm);

SKELFONT_INSTANTIATE_LOSSES(float)
SKELFONT_INSTANTIATE_LOSSES(double)

}  // namespace skelfont
