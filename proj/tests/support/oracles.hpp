#pragma once

// Reference implementations written independently of the library, used as
// test oracles. Plain loops, double precision, no shared helpers with core.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "skelfont/autograd.hpp"
#include "skelfont/raster.hpp"

namespace oracle {

// 8-connected components by explicit stack flood fill.
inline int components8(const skelfont::BinaryGrid& g) {
  std::vector<char> seen(g.cells.size(), 0);
  int n = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      if (!g.at(y, x) || seen[static_cast<std::size_t>(y) * g.width + x]) continue;
      ++n;
      stack.assign(1, {y, x});
      seen[static_cast<std::size_t>(y) * g.width + x] = 1;
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = cy + dy, nx = cx + dx;
            if (ny < 0 || nx < 0 || ny >= g.height || nx >= g.width) continue;
            const std::size_t k = static_cast<std::size_t>(ny) * g.width + nx;
            if (g.at(ny, nx) && !seen[k]) {
              seen[k] = 1;
              stack.push_back({ny, nx});
            }
          }
        }
      }
    }
  }
  return n;
}

inline bool is_subset(const skelfont::BinaryGrid& inner, const skelfont::BinaryGrid& outer) {
  for (std::size_t i = 0; i < inner.cells.size(); ++i) {
    if (inner.cells[i] && !outer.cells[i]) return false;
  }
  return true;
}

inline int count_blocks(const skelfont::BinaryGrid& g) {
  int n = 0;
  for (int y = 0; y + 1 < g.height; ++y) {
    for (int x = 0; x + 1 < g.width; ++x) {
      n += g.at(y, x) && g.at(y + 1, x) && g.at(y, x + 1) && g.at(y + 1, x + 1);
    }
  }
  return n;
}

struct ThinCheck {
  bool subset = false;
  bool no_block = false;
  bool components = false;
  bool ok() const { return subset && no_block && components; }
};

inline ThinCheck check_thin(const skelfont::BinaryGrid& in, const skelfont::BinaryGrid& out) {
  return {is_subset(out, in), count_blocks(out) == 0, components8(in) == components8(out)};
}

// Literal refined-attention evaluation:
//   M_k = omega_k F_k
//   L_ij = sum_e (theta Fq)_e,i (phi Fk)_e,j ; A = rowwise softmax(L)
//   out_k,i = sum_j A_ij M_k,j + M_k,i
// Feature maps are C x N (N = H*W), theta/phi are C1 x C, row-major.
struct AttentionCase {
  int c = 0, n = 0, c1 = 0;
  std::vector<double> fq, fk, omega, theta, phi;
};

inline std::vector<double> attention_matrix(const AttentionCase& a) {
  std::vector<double> q(static_cast<std::size_t>(a.c1) * a.n, 0.0), k(q.size(), 0.0);
  for (int e = 0; e < a.c1; ++e) {
    for (int i = 0; i < a.n; ++i) {
      for (int c = 0; c < a.c; ++c) {
        q[e * a.n + i] += a.theta[e * a.c + c] * a.fq[c * a.n + i];
        k[e * a.n + i] += a.phi[e * a.c + c] * a.fk[c * a.n + i];
      }
    }
  }
  std::vector<double> att(static_cast<std::size_t>(a.n) * a.n);
  for (int i = 0; i < a.n; ++i) {
    double mx = -1e300;
    for (int j = 0; j < a.n; ++j) {
      double l = 0;
      for (int e = 0; e < a.c1; ++e) l += q[e * a.n + i] * k[e * a.n + j];
      att[i * a.n + j] = l;
      mx = std::max(mx, l);
    }
    double z = 0;
    for (int j = 0; j < a.n; ++j) z += att[i * a.n + j] = std::exp(att[i * a.n + j] - mx);
    for (int j = 0; j < a.n; ++j) att[i * a.n + j] /= z;
  }
  return att;
}

inline std::vector<double> refined(const AttentionCase& a) {
  const std::vector<double> att = attention_matrix(a);
  std::vector<double> m(static_cast<std::size_t>(a.c) * a.n), out(m.size());
  for (int c = 0; c < a.c; ++c) {
    for (int i = 0; i < a.n; ++i) m[c * a.n + i] = a.omega[c] * a.fq[c * a.n + i];
  }
  for (int c = 0; c < a.c; ++c) {
    for (int i = 0; i < a.n; ++i) {
      double s = 0;
      for (int j = 0; j < a.n; ++j) s += att[i * a.n + j] * m[c * a.n + j];
      out[c * a.n + i] = s + m[c * a.n + i];
    }
  }
  return out;
}

// Central-difference gradient check of a scalar function against reverse mode.
// An entry that disagrees at step h is re-probed at h / 10: a ReLU kink inside
// the +-h window breaks the central difference without the gradient being
// wrong. Entries accepted only at the finer step are counted in `refined`.
struct GradCheck {
  double max_rel_err = 0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t refined = 0;
};

template <typename F>
GradCheck grad_check(F&& loss, const std::vector<std::pair<std::string, skelfont::Var<double>>>& inputs,
                     std::size_t max_entries = 24, double h = 1e-4, double tol = 1e-3) {
  for (auto [name, v] : inputs) v.zero_grad();
  loss().backward();
  std::vector<skelfont::Tensor<double>> grads;
  for (const auto& [name, v] : inputs) grads.push_back(v.grad());

  auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-5}); };
  GradCheck r;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    skelfont::Var<double> v = inputs[p].second;
    const std::size_t n = v.size();
    const std::size_t stride = n > max_entries ? n / max_entries : 1;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = v.value()[i];
      auto central = [&](double step) {
        skelfont::NoGradGuard guard;
        v.mutable_value()[i] = saved + step;
        const double fp = loss().item();
        v.mutable_value()[i] = saved - step;
        const double fm = loss().item();
        v.mutable_value()[i] = saved;
        return (fp - fm) / (2 * step);
      };
      const double analytic = grads[p][i];
      double numeric = central(h);
      double err = rel(analytic, numeric);
      if (err >= tol) {
        const double fine = central(h / 10);
        if (rel(analytic, fine) < tol) {
          ++r.refined;
          numeric = fine;
          err = rel(analytic, fine);
        }
      }
      ++r.checked;
      if (err > r.max_rel_err) {
        r.max_rel_err = err;
        r.worst = inputs[p].first + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) +
                  " numeric " + std::to_string(numeric);
      }
    }
  }
  return r;
}

}  // namespace oracle
