#pragma once

#include <cstdint>
#include <vector>

#include "skelfont/nn.hpp"

namespace skelfont {

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed parameter set. Moments are indexed like params.items(); the
// set must outlive the optimizer.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const ParamSet<T>& params, AdamConfig cfg);

  // Applies one update from the accumulated gradients. Parameters that never
  // received a gradient are skipped.
  void step(double lr);

  std::int64_t t() const { return t_; }
  void set_t(std::int64_t t) { t_ = t; }
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }
  const ParamSet<T>* params() const { return params_; }

 private:
  const ParamSet<T>* params_ = nullptr;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

}  // namespace skelfont
