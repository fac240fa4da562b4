#pragma once

#include <string>
#include <vector>

#include "skelfont/autograd.hpp"
#include "skelfont/rng.hpp"

namespace skelfont {

template <typename T>
struct NamedParam {
  std::string path;
  Var<T> var;
};

// Ordered registry of trainable tensors. Layers keep handles to the same
// nodes, so values written here are seen by the forward pass.
template <typename T>
class ParamSet {
 public:
  Var<T> add(const std::string& path, Tensor<T> value);
  // Registers an existing trainable handle under `path`.
  Var<T> adopt(const std::string& path, Var<T> var);
  void append(const ParamSet& other);

  const std::vector<NamedParam<T>>& items() const { return items_; }
  std::size_t count() const;  // total number of scalars
  void zero_grad();
  void set_requires_grad(bool on);

 private:
  std::vector<NamedParam<T>> items_;
};

template <typename T>
struct Conv2d {
  Var<T> weight;  // Cout x Cin x k x k
  Var<T> bias;    // Cout, undefined when bias-free
  int stride = 1;
  int pad = 0;

  // He-normal weights with gain `gain`; zero bias.
  static Conv2d make(ParamSet<T>& params, const std::string& path, int cin, int cout, int k,
                     int stride, int pad, bool bias, Rng& rng, double gain = 2.0);
  Var<T> operator()(const Var<T>& x) const;
};

template <typename T>
struct InstanceNorm {
  Var<T> gamma;
  Var<T> beta;

  static InstanceNorm make(ParamSet<T>& params, const std::string& path, int channels);
  Var<T> operator()(const Var<T>& x) const;
};

// conv -> instance norm -> optional ReLU.
template <typename T>
struct ConvNormAct {
  Conv2d<T> conv;
  InstanceNorm<T> norm;
  bool relu = true;

  static ConvNormAct make(ParamSet<T>& params, const std::string& path, int cin, int cout, int k,
                          int stride, int pad, Rng& rng, bool relu = true);
  Var<T> operator()(const Var<T>& x) const;
};

template <typename T>
struct ResidualBlock {
  ConvNormAct<T> first;
  ConvNormAct<T> second;

  static ResidualBlock make(ParamSet<T>& params, const std::string& path, int channels, Rng& rng);
  Var<T> operator()(const Var<T>& x) const;
};

// Lifts an image tensor into the graph as a constant.
template <typename T>
Var<T> constant(const Tensor<float>& t);

}  // namespace skelfont
