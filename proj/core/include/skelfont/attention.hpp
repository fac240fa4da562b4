#pragma once

#include "skelfont/autograd.hpp"
#include "skelfont/rng.hpp"

namespace skelfont {

// Domain classifier over globally pooled features: weights omega (C), bias (1).
template <typename T>
struct ClassifierHead {
  Var<T> omega;
  Var<T> bias;

  int channels() const { return static_cast<int>(omega.size()); }
  // omega = 1 / C so the pooled logit starts O(1); bias = 0.
  static ClassifierHead make(int channels);
};

// theta/phi are 1x1 convolutions stored as C1 x C x 1 x 1, without bias.
template <typename T>
struct RefinedAttentionParams {
  Var<T> theta;
  Var<T> phi;

  int embed_channels() const { return theta.dim(0); }
  int in_channels() const { return theta.dim(1); }
  // C1 = max(C / 8, 1); weights drawn from N(0, 1 / C).
  static RefinedAttentionParams make(int channels, Rng& rng);
};

int attention_embed_channels(int channels);

template <typename T>
struct CamOutput {
  Var<T> weighted;  // M: C x H x W, channel k scaled by omega_k
  Var<T> heat;      // 1 x H x W, sum over channels of omega_k F_k
  Var<T> logit;     // {1}: pooled F dotted with omega, plus bias
};

template <typename T>
CamOutput<T> cam_weight(const Var<T>& f, const ClassifierHead<T>& head);

// Row-softmaxed (H*W) x (H*W) affinity; queries from fq, keys from fk.
template <typename T>
Var<T> affinity(const Var<T>& fq, const Var<T>& fk, const RefinedAttentionParams<T>& p);

// Aggregates values (C x H x W) with attention rows and adds them back.
template <typename T>
Var<T> attend(const Var<T>& attention, const Var<T>& values);

template <typename T>
Var<T> sram(const Var<T>& f, const ClassifierHead<T>& head, const RefinedAttentionParams<T>& p);

template <typename T>
Var<T> cram(const Var<T>& fi, const Var<T>& fs, const ClassifierHead<T>& head,
            const RefinedAttentionParams<T>& p);

// Variants that also expose the CAM output of the image feature, used for the
// classification loss and heatmap rendering.
template <typename T>
struct RefinedOutput {
  Var<T> refined;
  CamOutput<T> cam;
};

template <typename T>
RefinedOutput<T> sram_full(const Var<T>& f, const ClassifierHead<T>& head,
                           const RefinedAttentionParams<T>& p);
template <typename T>
RefinedOutput<T> cram_full(const Var<T>& fi, const Var<T>& fs, const ClassifierHead<T>& head,
                           const RefinedAttentionParams<T>& p);

}  // namespace skelfont
