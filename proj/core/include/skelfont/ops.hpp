#pragma once

#include "skelfont/autograd.hpp"

// Differentiable primitives. Every op records its backward closure only when
// at least one input requires a gradient.
namespace skelfont::ops {

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> add_scalar(const Var<T>& a, T s);

template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> leaky_relu(const Var<T>& a, T slope);
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> sigmoid(const Var<T>& a);
template <typename T> Var<T> abs(const Var<T>& a);
template <typename T> Var<T> square(const Var<T>& a);

// Scalar reductions; result has shape {1}.
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);

template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);

// x: C x H x W, w: C. Multiplies channel k by w[k].
template <typename T> Var<T> scale_channels(const Var<T>& x, const Var<T>& w);
// x: C x H x W -> 1 x H x W.
template <typename T> Var<T> channel_sum(const Var<T>& x);
// x: C x H x W -> C.
template <typename T> Var<T> global_avg_pool(const Var<T>& x);

// x: Cin x H x W, w: Cout x Cin x k x k, b: Cout (may be undefined).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad);
// Nearest-neighbour 2x upsampling of C x H x W.
template <typename T> Var<T> upsample2x(const Var<T>& x);
// Per-channel normalization over H x W with affine gamma/beta (both length C).
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps);

// 2-D product op(a) * op(b) where op transposes when requested.
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool trans_a = false, bool trans_b = false);
// Row-wise softmax of an m x n matrix with max subtraction.
template <typename T> Var<T> softmax_rows(const Var<T>& a);
// x: n (any shape flattened), w: m x n, b: m (may be undefined) -> m.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);

// Mean over all elements of BCE-with-logits against a constant label.
template <typename T> Var<T> bce_with_logits(const Var<T>& logits, T label);
// logits: K -> scalar negative log-likelihood of `label`.
template <typename T> Var<T> softmax_cross_entropy(const Var<T>& logits, int label);

template <typename T> Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T> Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T> Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }

// mean((a - c)^2)
template <typename T> Var<T> mean_squared_to(const Var<T>& a, T c) {
  return mean(square(add_scalar(a, -c)));
}

}  // namespace skelfont::ops
