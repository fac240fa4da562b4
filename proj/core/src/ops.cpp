#include "skelfont/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace skelfont::ops {
namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": shapes " + shape_string(a.shape()) +
                                        " and " + shape_string(b.shape()) + " differ");
  }
}

template <typename T>
void require_rank(const Var<T>& a, int rank, const char* op) {
  if (a.value().rank() != rank) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": expected rank " + std::to_string(rank) +
                                        ", got shape " + shape_string(a.shape()));
  }
}

template <typename T>
bool wants_grad(const Node<T>& n, std::size_t i) {
  return n.inputs[i]->requires_grad;
}

// Elementwise unary op with derivative expressed through (x, y).
template <typename T, typename F, typename D>
Var<T> unary(const Var<T>& a, F f, D dfdx) {
  Tensor<T> out(a.shape());
  const T* x = a.value().data();
  T* y = out.data();
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) y[i] = f(x[i]);
  return Var<T>::make(std::move(out), {a}, [dfdx](Node<T>& self) {
    Node<T>& in = *self.inputs[0];
    T* gx = in.grad_buffer().data();
    const T* x = in.value.data();
    const T* y = self.value.data();
    const T* gy = self.grad.data();
    const std::size_t n = self.value.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * dfdx(x[i], y[i]);
  });
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return Var<T>::make(std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants_grad(self, k)) continue;
      T* g = self.inputs[k]->grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return Var<T>::make(std::move(out), {a, b}, [](Node<T>& self) {
    if (wants_grad(self, 0)) {
      T* g = self.inputs[0]->grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(self, 1)) {
      T* g = self.inputs[1]->grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return Var<T>::make(std::move(out), {a, b}, [](Node<T>& self) {
    const Tensor<T>& av = self.inputs[0]->value;
    const Tensor<T>& bv = self.inputs[1]->value;
    if (wants_grad(self, 0)) {
      T* g = self.inputs[0]->grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants_grad(self, 1)) {
      T* g = self.inputs[1]->grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  return unary(a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  return unary(a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return unary(a, [](T x) { return x > T(0) ? x : T(0); },
               [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  return unary(a, [slope](T x) { return x > T(0) ? x : slope * x; },
               [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  return unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  return unary(a, [](T x) { return std::abs(x); },
               [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T total = T(0);
  for (T v : a.value().values()) total += v;
  return Var<T>::make(Tensor<T>({1}, total), {a}, [](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    const T gy = self.grad[0];
    for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i) g[i] += gy;
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  if (a.size() == 0) fail(ErrorCode::kEmptyInput, "mean of empty tensor");
  T total = T(0);
  for (T v : a.value().values()) total += v;
  const T n = static_cast<T>(a.size());
  return Var<T>::make(Tensor<T>({1}, total / n), {a}, [n](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    const T gy = self.grad[0] / n;
    for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i) g[i] += gy;
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  return Var<T>::make(a.value().reshaped(std::move(shape)), {a}, [](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& w) {
  require_rank(x, 3, "scale_channels");
  const int c = x.dim(0);
  if (static_cast<int>(w.size()) != c) {
    fail(ErrorCode::kChannelMismatch, "scale_channels: " + std::to_string(w.size()) +
                                          " weights for " + std::to_string(c) + " channels");
  }
  const std::size_t plane = x.size() / static_cast<std::size_t>(c);
  Tensor<T> out(x.shape());
  for (int k = 0; k < c; ++k) {
    const T wk = w.value()[static_cast<std::size_t>(k)];
    const T* src = x.value().data() + k * plane;
    T* dst = out.data() + k * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = wk * src[i];
  }
  return Var<T>::make(std::move(out), {x, w}, [c, plane](Node<T>& self) {
    const Tensor<T>& xv = self.inputs[0]->value;
    const Tensor<T>& wv = self.inputs[1]->value;
    if (wants_grad(self, 0)) {
      T* g = self.inputs[0]->grad_buffer().data();
      for (int k = 0; k < c; ++k) {
        const T wk = wv[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < plane; ++i) g[k * plane + i] += self.grad[k * plane + i] * wk;
      }
    }
    if (wants_grad(self, 1)) {
      T* g = self.inputs[1]->grad_buffer().data();
      for (int k = 0; k < c; ++k) {
        T acc = T(0);
        for (std::size_t i = 0; i < plane; ++i) acc += self.grad[k * plane + i] * xv[k * plane + i];
        g[k] += acc;
      }
    }
  });
}

template <typename T>
Var<T> channel_sum(const Var<T>& x) {
  require_rank(x, 3, "channel_sum");
  const int c = x.dim(0);
  const std::size_t plane = x.size() / static_cast<std::size_t>(c);
  Tensor<T> out({1, x.dim(1), x.dim(2)});
  for (int k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < plane; ++i) out[i] += x.value()[k * plane + i];
  }
  return Var<T>::make(std::move(out), {x}, [c, plane](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    for (int k = 0; k < c; ++k) {
      for (std::size_t i = 0; i < plane; ++i) g[k * plane + i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  require_rank(x, 3, "global_avg_pool");
  const int c = x.dim(0);
  const std::size_t plane = x.size() / static_cast<std::size_t>(c);
  Tensor<T> out({c});
  for (int k = 0; k < c; ++k) {
    T acc = T(0);
    for (std::size_t i = 0; i < plane; ++i) acc += x.value()[k * plane + i];
    out[static_cast<std::size_t>(k)] = acc / static_cast<T>(plane);
  }
  return Var<T>::make(std::move(out), {x}, [c, plane](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    for (int k = 0; k < c; ++k) {
      const T gk = self.grad[static_cast<std::size_t>(k)] / static_cast<T>(plane);
      for (std::size_t i = 0; i < plane; ++i) g[k * plane + i] += gk;
    }
  });
}

namespace {

struct ConvGeometry {
  int cin, h, w, k, stride, pad, ho, wo;
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const int n = g.ho * g.wo;
  for (int c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        T* row = cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * n;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* dx) {
  const int n = g.ho * g.wo;
  for (int c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const T* row = cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * n;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + oy * g.wo;
          T* dst = dx + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  require_rank(x, 3, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  if (w.dim(1) != x.dim(0)) {
    fail(ErrorCode::kChannelMismatch, "conv2d: weight expects " + std::to_string(w.dim(1)) +
                                          " input channels, got " + std::to_string(x.dim(0)));
  }
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), w.dim(2), stride, pad, 0, 0};
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  if (g.ho < 1 || g.wo < 1) {
    fail(ErrorCode::kBadSpatialSize, "conv2d: input " + shape_string(x.shape()) +
                                         " too small for kernel " + std::to_string(g.k));
  }
  const int cout = w.dim(0);
  const int kdim = g.cin * g.k * g.k;
  const int n = g.ho * g.wo;

  auto cols = std::make_shared<std::vector<T>>(static_cast<std::size_t>(kdim) * n);
  im2col(x.value().data(), g, cols->data());

  Tensor<T> out({cout, g.ho, g.wo});
  MapR<T> y(out.data(), cout, n);
  CMapR<T> wm(w.value().data(), cout, kdim);
  CMapR<T> cm(cols->data(), kdim, n);
  y.noalias() = wm * cm;
  const bool has_bias = b.defined();
  if (has_bias) {
    for (int o = 0; o < cout; ++o) y.row(o).array() += b.value()[static_cast<std::size_t>(o)];
  }

  std::vector<Var<T>> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  return Var<T>::make(std::move(out), inputs, [g, cout, kdim, n, cols, has_bias](Node<T>& self) {
    CMapR<T> gy(self.grad.data(), cout, n);
    CMapR<T> cm(cols->data(), kdim, n);
    if (wants_grad(self, 1)) {
      MapR<T> gw(self.inputs[1]->grad_buffer().data(), cout, kdim);
      gw.noalias() += gy * cm.transpose();
    }
    if (has_bias && wants_grad(self, 2)) {
      T* gb = self.inputs[2]->grad_buffer().data();
      // Plain loop: Eigen's vectorised sum over a Map depends on pointer
      // alignment, which breaks bitwise reproducibility across processes.
      for (int o = 0; o < cout; ++o) {
        const T* row = self.grad.data() + static_cast<std::ptrdiff_t>(o) * n;
        T acc = 0;
        for (int j = 0; j < n; ++j) acc += row[j];
        gb[o] += acc;
      }
    }
    if (wants_grad(self, 0)) {
      CMapR<T> wm(self.inputs[1]->value.data(), cout, kdim);
      MatR<T> gcols = wm.transpose() * gy;
      col2im(gcols.data(), g, self.inputs[0]->grad_buffer().data());
    }
  });
}

template <typename T>
Var<T> upsample2x(const Var<T>& x) {
  require_rank(x, 3, "upsample2x");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> out({c, 2 * h, 2 * w});
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < 2 * h; ++y) {
      for (int xx = 0; xx < 2 * w; ++xx) out.at(k, y, xx) = x.value().at(k, y / 2, xx / 2);
    }
  }
  return Var<T>::make(std::move(out), {x}, [c, h, w](Node<T>& self) {
    Tensor<T>& g = self.inputs[0]->grad_buffer();
    for (int k = 0; k < c; ++k) {
      for (int y = 0; y < 2 * h; ++y) {
        for (int xx = 0; xx < 2 * w; ++xx) g.at(k, y / 2, xx / 2) += self.grad.at(k, y, xx);
      }
    }
  });
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  require_rank(x, 3, "instance_norm");
  const int c = x.dim(0);
  if (static_cast<int>(gamma.size()) != c || static_cast<int>(beta.size()) != c) {
    fail(ErrorCode::kChannelMismatch, "instance_norm: affine size does not match channels");
  }
  const std::size_t plane = x.size() / static_cast<std::size_t>(c);
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(c));
  Tensor<T> out(x.shape());
  for (int k = 0; k < c; ++k) {
    const T* src = x.value().data() + k * plane;
    T mu = T(0);
    for (std::size_t i = 0; i < plane; ++i) mu += src[i];
    mu /= static_cast<T>(plane);
    T var = T(0);
    for (std::size_t i = 0; i < plane; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<T>(plane);
    const T inv = T(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(k)] = inv;
    const T gk = gamma.value()[static_cast<std::size_t>(k)];
    const T bk = beta.value()[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < plane; ++i) {
      const T xh = (src[i] - mu) * inv;
      (*xhat)[k * plane + i] = xh;
      out[k * plane + i] = gk * xh + bk;
    }
  }
  return Var<T>::make(std::move(out), {x, gamma, beta}, [c, plane, xhat, inv_std](Node<T>& self) {
    const Tensor<T>& gv = self.inputs[1]->value;
    const T n = static_cast<T>(plane);
    for (int k = 0; k < c; ++k) {
      const T* gy = self.grad.data() + k * plane;
      const T* xh = xhat->data() + k * plane;
      T sum_gy = T(0), sum_gy_xh = T(0);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_gy += gy[i];
        sum_gy_xh += gy[i] * xh[i];
      }
      if (wants_grad(self, 1)) self.inputs[1]->grad_buffer()[static_cast<std::size_t>(k)] += sum_gy_xh;
      if (wants_grad(self, 2)) self.inputs[2]->grad_buffer()[static_cast<std::size_t>(k)] += sum_gy;
      if (wants_grad(self, 0)) {
        const T gk = gv[static_cast<std::size_t>(k)];
        const T coef = gk * (*inv_std)[static_cast<std::size_t>(k)] / n;
        T* gx = self.inputs[0]->grad_buffer().data() + k * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          gx[i] += coef * (n * gy[i] - sum_gy - xh[i] * sum_gy_xh);
        }
      }
    }
  });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool trans_a, bool trans_b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const int ar = a.dim(0), ac = a.dim(1), br = b.dim(0), bc = b.dim(1);
  const int m = trans_a ? ac : ar;
  const int k = trans_a ? ar : ac;
  const int k2 = trans_b ? bc : br;
  const int n = trans_b ? br : bc;
  if (k != k2) {
    fail(ErrorCode::kShapeMismatch, "matmul: inner dimensions " + std::to_string(k) + " and " +
                                        std::to_string(k2) + " differ");
  }
  Tensor<T> out({m, n});
  MapR<T> c(out.data(), m, n);
  CMapR<T> am(a.value().data(), ar, ac);
  CMapR<T> bm(b.value().data(), br, bc);
  if (!trans_a && !trans_b) c.noalias() = am * bm;
  if (trans_a && !trans_b) c.noalias() = am.transpose() * bm;
  if (!trans_a && trans_b) c.noalias() = am * bm.transpose();
  if (trans_a && trans_b) c.noalias() = am.transpose() * bm.transpose();
  return Var<T>::make(std::move(out), {a, b}, [=](Node<T>& self) {
    CMapR<T> gc(self.grad.data(), m, n);
    CMapR<T> am(self.inputs[0]->value.data(), ar, ac);
    CMapR<T> bm(self.inputs[1]->value.data(), br, bc);
    if (wants_grad(self, 0)) {
      MapR<T> ga(self.inputs[0]->grad_buffer().data(), ar, ac);
      // d op(A) = dC * op(B)^T
      if (!trans_a && !trans_b) ga.noalias() += gc * bm.transpose();
      if (!trans_a && trans_b) ga.noalias() += gc * bm;
      if (trans_a && !trans_b) ga.noalias() += bm * gc.transpose();
      if (trans_a && trans_b) ga.noalias() += bm.transpose() * gc.transpose();
    }
    if (wants_grad(self, 1)) {
      MapR<T> gb(self.inputs[1]->grad_buffer().data(), br, bc);
      // d op(B) = op(A)^T * dC
      if (!trans_a && !trans_b) gb.noalias() += am.transpose() * gc;
      if (trans_a && !trans_b) gb.noalias() += am * gc;
      if (!trans_a && trans_b) gb.noalias() += gc.transpose() * am;
      if (trans_a && trans_b) gb.noalias() += gc.transpose() * am.transpose();
    }
  });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
  require_rank(a, 2, "softmax_rows");
  const int m = a.dim(0), n = a.dim(1);
  Tensor<T> out(a.shape());
  for (int r = 0; r < m; ++r) {
    const T* src = a.value().data() + static_cast<std::size_t>(r) * n;
    T* dst = out.data() + static_cast<std::size_t>(r) * n;
    const T mx = *std::max_element(src, src + n);
    T total = T(0);
    for (int j = 0; j < n; ++j) {
      dst[j] = std::exp(src[j] - mx);
      total += dst[j];
    }
    for (int j = 0; j < n; ++j) dst[j] /= total;
  }
  return Var<T>::make(std::move(out), {a}, [m, n](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    for (int r = 0; r < m; ++r) {
      const T* y = self.value.data() + static_cast<std::size_t>(r) * n;
      const T* gy = self.grad.data() + static_cast<std::size_t>(r) * n;
      T dot = T(0);
      for (int j = 0; j < n; ++j) dot += gy[j] * y[j];
      T* gx = g + static_cast<std::size_t>(r) * n;
      for (int j = 0; j < n; ++j) gx[j] += y[j] * (gy[j] - dot);
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  require_rank(w, 2, "linear weight");
  const int m = w.dim(0), n = w.dim(1);
  if (static_cast<int>(x.size()) != n) {
    fail(ErrorCode::kShapeMismatch, "linear: input size " + std::to_string(x.size()) +
                                        " does not match weight " + shape_string(w.shape()));
  }
  const bool has_bias = b.defined();
  Tensor<T> out({m});
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> y(out.data(), m);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xv(x.value().data(), n);
  CMapR<T> wm(w.value().data(), m, n);
  y.noalias() = wm * xv;
  if (has_bias) {
    for (int i = 0; i < m; ++i) y[i] += b.value()[static_cast<std::size_t>(i)];
  }
  std::vector<Var<T>> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  return Var<T>::make(std::move(out), inputs, [m, n, has_bias](Node<T>& self) {
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> gy(self.grad.data(), m);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xv(self.inputs[0]->value.data(), n);
    CMapR<T> wm(self.inputs[1]->value.data(), m, n);
    if (wants_grad(self, 0)) {
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gx(self.inputs[0]->grad_buffer().data(), n);
      gx.noalias() += wm.transpose() * gy;
    }
    if (wants_grad(self, 1)) {
      MapR<T> gw(self.inputs[1]->grad_buffer().data(), m, n);
      gw.noalias() += gy * xv.transpose();
    }
    if (has_bias && wants_grad(self, 2)) {
      T* gb = self.inputs[2]->grad_buffer().data();
      for (int i = 0; i < m; ++i) gb[i] += gy[i];
    }
  });
}

template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, T label) {
  const std::size_t n = logits.size();
  if (n == 0) fail(ErrorCode::kEmptyInput, "bce_with_logits of empty tensor");
  T total = T(0);
  for (T x : logits.value().values()) {
    total += std::max(x, T(0)) - x * label + std::log1p(std::exp(-std::abs(x)));
  }
  return Var<T>::make(Tensor<T>({1}, total / static_cast<T>(n)), {logits},
                      [label, n](Node<T>& self) {
                        const Tensor<T>& xv = self.inputs[0]->value;
                        T* g = self.inputs[0]->grad_buffer().data();
                        const T scale = self.grad[0] / static_cast<T>(n);
                        for (std::size_t i = 0; i < n; ++i) {
                          const T p = T(1) / (T(1) + std::exp(-xv[i]));
                          g[i] += scale * (p - label);
                        }
                      });
}

template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, int label) {
  const int k = static_cast<int>(logits.size());
  if (label < 0 || label >= k) {
    fail(ErrorCode::kUnknownLabel, "softmax_cross_entropy: label " + std::to_string(label) +
                                       " outside [0, " + std::to_string(k) + ")");
  }
  const T* x = logits.value().data();
  const T mx = *std::max_element(x, x + k);
  auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(k));
  T total = T(0);
  for (int i = 0; i < k; ++i) {
    (*probs)[static_cast<std::size_t>(i)] = std::exp(x[i] - mx);
    total += (*probs)[static_cast<std::size_t>(i)];
  }
  for (T& p : *probs) p /= total;
  const T loss = -(x[label] - mx - std::log(total));
  return Var<T>::make(Tensor<T>({1}, loss), {logits}, [probs, label, k](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    const T gy = self.grad[0];
    for (int i = 0; i < k; ++i) {
      g[i] += gy * ((*probs)[static_cast<std::size_t>(i)] - (i == label ? T(1) : T(0)));
    }
  });
}

#define SKELFONT_INSTANTIATE_OPS(T)                                                       \
  template Var<T> add(const Var<T>&, const Var<T>&);                                    \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                    \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                    \
  template Var<T> scale(const Var<T>&, T);                                              \
  template Var<T> add_scalar(const Var<T>&, T);                                         \
  template Var<T> relu(const Var<T>&);                                                  \
  template Var<T> leaky_relu(const Var<T>&, T);                                         \
  template Var<T> tanh(const Var<T>&);                                                  \
  template Var<T> sigmoid(const Var<T>&);                                               \
  template Var<T> abs(const Var<T>&);                                                   \
  template Var<T> square(const Var<T>&);                                                \
  template Var<T> sum(const Var<T>&);                                                   \
  template Var<T> mean(const Var<T>&);                                                  \
  template Var<T> reshape(const Var<T>&, Shape);                                        \
  template Var<T> scale_channels(const Var<T>&, const Var<T>&);                         \
  template Var<T> channel_sum(const Var<T>&);                                           \
  template Var<T> global_avg_pool(const Var<T>&);                                       \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);        \
  template Var<T> upsample2x(const Var<T>&);                                            \
  template Var<T> instance_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);        \
  template Var<T> matmul(const Var<T>&, const Var<T>&, bool, bool);                     \
  template Var<T> softmax_rows(const Var<T>&);                                          \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                  \
  template Var<T> bce_with_logits(const Var<T>&, T);                                    \
  template Var<T> softmax_cross_entropy(const Var<T>&, int);

SKELFONT_INSTANTIATE_OPS(float)
SKELFONT_INSTANTIATE_OPS(double)

}  // namespace skelfont::ops
