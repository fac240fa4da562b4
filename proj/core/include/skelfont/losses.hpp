#pragma once

#include <string_view>

#include "skelfont/networks.hpp"

namespace skelfont {

struct LossWeights {
  double lambda1 = 5.0;    // adversarial
  double lambda2 = 10.0;   // cycle
  double lambda3 = 100.0;  // domain classification
  double lambda4 = 10.0;   // content (pixel + skeleton consistency)

  void validate() const;  // ConfigError unless all finite and >= 0
};

// Per-term values; total = l1*(adv_i + adv_s) + l2*cycle + l3*cls + l4*(pix + sc).
struct LossBreakdown {
  double pix = 0, sc = 0, cycle = 0, cls = 0, adv_i = 0, adv_s = 0, total = 0;
};

enum class AdvForm { kLsgan, kBce };
enum class Side { kGenerator, kDiscriminator };
enum class Domain { kSource = 0, kTarget = 1 };

std::string_view adv_form_name(AdvForm form);
AdvForm parse_adv_form(std::string_view name);

// Composes the weighted total. Throws NonFiniteLoss if any part is NaN or
// infinite, naming the offending terms.
LossBreakdown total_objective(const LossBreakdown& parts, const LossWeights& w);

template <typename T>
Var<T> l1_pixel(const Var<T>& a, const Var<T>& b);

// L1 between SG(gen_out) and SG(target). The target branch carries no
// gradient; SG parameters receive none when the translator is frozen.
template <typename T>
Var<T> skeleton_consistency(const SkeletonTranslator<T>& sg, const Var<T>& gen_out,
                            const Var<T>& target);

// Both round trips: x -> G_F -> G_B and y -> G_B -> G_F. The second hop of
// each trip is fed the SG skeleton of the first hop's output.
template <typename T>
Var<T> cycle_loss(const Generator<T>& gf, const Generator<T>& gb, const SkeletonTranslator<T>& sg,
                  const Var<T>& x_img, const Var<T>& x_skel, const Var<T>& y_img,
                  const Var<T>& y_skel);

template <typename T>
Var<T> cls_loss(const Var<T>& logit, Domain label);

// Adversarial loss on precomputed score maps. `real` is ignored on the
// generator side and may be undefined.
template <typename T>
Var<T> adv_from_scores(const Var<T>& real, const Var<T>& fake, Side side, AdvForm form);

// On the discriminator side `fake` is detached before scoring.
template <typename T>
Var<T> adv_image(const Discriminator<T>& d, const Var<T>& real, const Var<T>& fake, Side side,
                 AdvForm form = AdvForm::kLsgan);

template <typename T>
Var<T> adv_skeleton(const Discriminator<T>& d_s, const SkeletonTranslator<T>& sg,
                    const Var<T>& real_target, const Var<T>& gen_out, Side side,
                    AdvForm form = AdvForm::kLsgan);

}  // namespace skelfont
