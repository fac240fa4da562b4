#include "skelfont/nn.hpp"

#include <cmath>

#include "skelfont/ops.hpp"

namespace skelfont {

template <typename T>
Var<T> ParamSet<T>::add(const std::string& path, Tensor<T> value) {
  return adopt(path, Var<T>(std::move(value), true));
}

template <typename T>
Var<T> ParamSet<T>::adopt(const std::string& path, Var<T> var) {
  for (const auto& p : items_) {
    if (p.path == path) fail(ErrorCode::kInvalidArgument, "duplicate parameter path " + path);
  }
  items_.push_back({path, var});
  return var;
}

template <typename T>
void ParamSet<T>::append(const ParamSet& other) {
  for (const auto& p : other.items_) adopt(p.path, p.var);
}

template <typename T>
std::size_t ParamSet<T>::count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.var.size();
  return n;
}

template <typename T>
void ParamSet<T>::zero_grad() {
  for (auto& p : items_) p.var.zero_grad();
}

template <typename T>
void ParamSet<T>::set_requires_grad(bool on) {
  for (auto& p : items_) p.var.set_requires_grad(on);
}

template <typename T>
Conv2d<T> Conv2d<T>::make(ParamSet<T>& params, const std::string& path, int cin, int cout, int k,
                          int stride, int pad, bool bias, Rng& rng, double gain) {
  Conv2d c;
  const double sd = std::sqrt(gain / static_cast<double>(cin * k * k));
  Tensor<T> w({cout, cin, k, k});
  for (T& v : w.values()) v = static_cast<T>(sd * rng.normal());
  c.weight = params.add(path + "/w", std::move(w));
  if (bias) c.bias = params.add(path + "/b", Tensor<T>({cout}));
  c.stride = stride;
  c.pad = pad;
  return c;
}

template <typename T>
Var<T> Conv2d<T>::operator()(const Var<T>& x) const {
  return ops::conv2d(x, weight, bias, stride, pad);
}

template <typename T>
InstanceNorm<T> InstanceNorm<T>::make(ParamSet<T>& params, const std::string& path, int channels) {
  return {params.add(path + "/gamma", Tensor<T>({channels}, T(1))),
          params.add(path + "/beta", Tensor<T>({channels}, T(0)))};
}

template <typename T>
Var<T> InstanceNorm<T>::operator()(const Var<T>& x) const {
  return ops::instance_norm(x, gamma, beta, T(1e-5));
}

template <typename T>
ConvNormAct<T> ConvNormAct<T>::make(ParamSet<T>& params, const std::string& path, int cin,
                                    int cout, int k, int stride, int pad, Rng& rng, bool relu) {
  // The norm cancels any conv bias, so none is allocated.
  return {Conv2d<T>::make(params, path + "/conv", cin, cout, k, stride, pad, false, rng),
          InstanceNorm<T>::make(params, path + "/norm", cout), relu};
}

template <typename T>
Var<T> ConvNormAct<T>::operator()(const Var<T>& x) const {
  Var<T> y = norm(conv(x));
  return relu ? ops::relu(y) : y;
}

template <typename T>
ResidualBlock<T> ResidualBlock<T>::make(ParamSet<T>& params, const std::string& path, int channels,
                                        Rng& rng) {
  return {ConvNormAct<T>::make(params, path + "/a", channels, channels, 3, 1, 1, rng, true),
          ConvNormAct<T>::make(params, path + "/b", channels, channels, 3, 1, 1, rng, false)};
}

template <typename T>
Var<T> ResidualBlock<T>::operator()(const Var<T>& x) const {
  return ops::add(second(first(x)), x);
}

template <typename T>
Var<T> constant(const Tensor<float>& t) {
  if constexpr (std::is_same_v<T, float>) {
    return Var<T>(t);
  } else {
    return Var<T>(t.cast<T>());
  }
}

#define SKELFONT_INSTANTIATE_NN(T)      \
  template class ParamSet<T>;          \
  template struct Conv2d<T>;           \
  template struct InstanceNorm<T>;     \
  template struct ConvNormAct<T>;      \
  template struct ResidualBlock<T>;    \
  template Var<T> constant<T>(const Tensor<float>&);

SKELFONT_INSTANTIATE_NN(float)
SKELFONT_INSTANTIATE_NN(double)

}  // namespace skelfont
