#include "skelfont/attention.hpp"

#include <algorithm>
#include <cmath>

#include "skelfont/ops.hpp"

namespace skelfont {

int attention_embed_channels(int channels) { return std::max(channels / 8, 1); }

template <typename T>
ClassifierHead<T> ClassifierHead<T>::make(int channels) {
  return {Var<T>(Tensor<T>({channels}, T(1) / static_cast<T>(channels)), true),
          Var<T>(Tensor<T>({1}, T(0)), true)};
}

template <typename T>
RefinedAttentionParams<T> RefinedAttentionParams<T>::make(int channels, Rng& rng) {
  const int c1 = attention_embed_channels(channels);
  const double sd = 1.0 / std::sqrt(static_cast<double>(channels));
  auto draw = [&] {
    Tensor<T> w({c1, channels, 1, 1});
    for (T& v : w.values()) v = static_cast<T>(sd * rng.normal());
    return Var<T>(std::move(w), true);
  };
  RefinedAttentionParams p;
  p.theta = draw();
  p.phi = draw();
  return p;
}

namespace {

template <typename T>
void require_feature(const Var<T>& f, const char* op) {
  if (f.value().rank() != 3) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": expected C x H x W, got " +
                                        shape_string(f.shape()));
  }
}

template <typename T>
Var<T> project(const Var<T>& f, const Var<T>& w) {
  const int c = f.dim(0);
  if (w.dim(1) != c) {
    fail(ErrorCode::kChannelMismatch, "1x1 projection expects " + std::to_string(w.dim(1)) +
                                          " channels, got " + std::to_string(c));
  }
  const Var<T> flat = ops::reshape(f, {c, f.dim(1) * f.dim(2)});
  return ops::matmul(ops::reshape(w, {w.dim(0), c}), flat);  // C1 x HW
}

}  // namespace

template <typename T>
CamOutput<T> cam_weight(const Var<T>& f, const ClassifierHead<T>& head) {
  require_feature(f, "cam_weight");
  if (head.channels() != f.dim(0)) {
    fail(ErrorCode::kChannelMismatch, "cam_weight: head has " + std::to_string(head.channels()) +
                                          " weights for " + std::to_string(f.dim(0)) + " channels");
  }
  CamOutput<T> out;
  out.weighted = ops::scale_channels(f, head.omega);
  out.heat = ops::channel_sum(out.weighted);
  out.logit = ops::linear(ops::global_avg_pool(f), ops::reshape(head.omega, {1, head.channels()}),
                          head.bias);
  return out;
}

template <typename T>
Var<T> affinity(const Var<T>& fq, const Var<T>& fk, const RefinedAttentionParams<T>& p) {
  require_feature(fq, "affinity");
  require_feature(fk, "affinity");
  if (fq.shape() != fk.shape()) {
    fail(ErrorCode::kShapeMismatch, "affinity: query " + shape_string(fq.shape()) + " vs key " +
                                        shape_string(fk.shape()));
  }
  const Var<T> q = project(fq, p.theta);
  const Var<T> k = project(fk, p.phi);
  return ops::softmax_rows(ops::matmul(q, k, true, false));  // HW x HW
}

template <typename T>
Var<T> attend(const Var<T>& attention, const Var<T>& values) {
  const int c = values.dim(0), h = values.dim(1), w = values.dim(2);
  const Var<T> flat = ops::reshape(values, {c, h * w});
  // (A g(M))^T = M_flat A^T, already in C x HW layout.
  const Var<T> agg = ops::matmul(flat, attention, false, true);
  return ops::add(ops::reshape(agg, {c, h, w}), values);
}

template <typename T>
RefinedOutput<T> sram_full(const Var<T>& f, const ClassifierHead<T>& head,
                           const RefinedAttentionParams<T>& p) {
  return cram_full(f, f, head, p);
}

template <typename T>
RefinedOutput<T> cram_full(const Var<T>& fi, const Var<T>& fs, const ClassifierHead<T>& head,
                           const RefinedAttentionParams<T>& p) {
  RefinedOutput<T> out;
  out.cam = cam_weight(fi, head);
  out.refined = attend(affinity(fi, fs, p), out.cam.weighted);
  return out;
}

template <typename T>
Var<T> sram(const Var<T>& f, const ClassifierHead<T>& head, const RefinedAttentionParams<T>& p) {
  return sram_full(f, head, p).refined;
}

template <typename T>
Var<T> cram(const Var<T>& fi, const Var<T>& fs, const ClassifierHead<T>& head,
            const RefinedAttentionParams<T>& p) {
  return cram_full(fi, fs, head, p).refined;
}

#define SKELFONT_INSTANTIATE_ATTENTION(T)                                                    \
  template struct ClassifierHead<T>;                                                       \
  template struct RefinedAttentionParams<T>;                                               \
  template CamOutput<T> cam_weight(const Var<T>&, const ClassifierHead<T>&);               \
  template Var<T> affinity(const Var<T>&, const Var<T>&, const RefinedAttentionParams<T>&); \
  template Var<T> attend(const Var<T>&, const Var<T>&);                                    \
  template Var<T> sram(const Var<T>&, const ClassifierHead<T>&,                            \
                       const RefinedAttentionParams<T>&);                                  \
  template Var<T> cram(const Var<T>&, const Var<T>&, const ClassifierHead<T>&,             \
                       const RefinedAttentionParams<T>&);                                  \
  template RefinedOutput<T> sram_full(const Var<T>&, const ClassifierHead<T>&,             \
                                      const RefinedAttentionParams<T>&);                   \
  template RefinedOutput<T> cram_full(const Var<T>&, const Var<T>&, const ClassifierHead<T>&, \
                                      const RefinedAttentionParams<T>&);

SKELFONT_INSTANTIATE_ATTENTION(float)
SKELFONT_INSTANTIATE_ATTENTION(double)

}  // namespace skelfont
