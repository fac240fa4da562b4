#include "skelfont/optim.hpp"

#include <cmath>

namespace skelfont {

template <typename T>
Adam<T>::Adam(const ParamSet<T>& params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
  for (const auto& p : params.items()) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  if (!params_) fail(ErrorCode::kInvalidArgument, "Adam::step on an unbound optimizer");
  const auto& items = params_->items();
  if (items.size() != m_.size()) {
    fail(ErrorCode::kShapeMismatch, "parameter set changed after optimizer construction");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T step = static_cast<T>(lr / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  const T eps = static_cast<T>(cfg_.eps);
  for (std::size_t i = 0; i < items.size(); ++i) {
    Var<T> var = items[i].var;
    if (!var.node()->has_grad()) continue;
    const T* g = var.node()->grad.data();
    T* w = var.mutable_value().data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    const std::size_t n = var.size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      w[j] -= step * m[j] / (std::sqrt(v[j] * inv_bc2) + eps);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace skelfont
