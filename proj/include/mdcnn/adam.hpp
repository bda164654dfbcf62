#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mdcnn/model.hpp"
#include "mdcnn/tensor.hpp"

namespace mdcnn {

/// Adam with bias correction. Hyperparameter defaults are the canonical
/// ones; the step count and both moment sets live here so a state object is
/// tied to one parameter set.
template <typename T = float>
struct AdamStateT {
  std::int64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::string> names;
  std::vector<TensorT<T>> m;
  std::vector<TensorT<T>> v;
};

using AdamState = AdamStateT<float>;

template <typename T>
AdamStateT<T> make_adam_state(const std::vector<std::pair<std::string, const TensorT<T>*>>& params,
                              double lr = 1e-3) {
  AdamStateT<T> s;
  s.lr = lr;
  for (const auto& [name, tensor] : params) {
    s.names.push_back(name);
    s.m.emplace_back(tensor->shape(), T(0));
    s.v.emplace_back(tensor->shape(), T(0));
  }
  return s;
}

template <typename T>
AdamStateT<T> make_adam_state(const ModelParamsT<T>& params, double lr = 1e-3) {
  return make_adam_state(params.named_tensors(), lr);
}

/// One Adam update over an ordered parameter list:
///   t += 1
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
///   theta -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
template <typename T>
void adam_step(const std::vector<std::pair<std::string, TensorT<T>*>>& params,
               const std::vector<std::pair<std::string, const TensorT<T>*>>& grads,
               AdamStateT<T>& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and state sets differ in size");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    TensorT<T>& theta = *params[p].second;
    const TensorT<T>& g = *grads[p].second;
    if (!theta.same_shape(g) || !theta.same_shape(state.m[p])) {
      throw std::invalid_argument("adam_step: gradient shape does not mirror parameter " +
                                  params[p].first);
    }
    if (!g.all_finite()) {
      throw std::runtime_error("adam_step: non-finite gradient for " + params[p].first);
    }
    T* th = theta.data();
    const T* pg = g.data();
    T* m = state.m[p].data();
    T* v = state.v[p].data();
    const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
    const T lr = static_cast<T>(state.lr), eps = static_cast<T>(state.eps);
    const T ibc1 = static_cast<T>(1.0 / bc1), ibc2 = static_cast<T>(1.0 / bc2);
    for (std::int64_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * pg[i];
      v[i] = b2 * v[i] + (T(1) - b2) * pg[i] * pg[i];
      const T mhat = m[i] * ibc1;
      const T vhat = v[i] * ibc2;
      th[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    if (!theta.all_finite()) {
      throw std::runtime_error("adam_step: update produced a non-finite value in " +
                               params[p].first);
    }
  }
}

template <typename T>
void adam_step(ModelParamsT<T>& params, const ModelGradsT<T>& grads, AdamStateT<T>& state) {
  adam_step(params.named_tensors(), grads.named_tensors(), state);
}

}  // namespace mdcnn
