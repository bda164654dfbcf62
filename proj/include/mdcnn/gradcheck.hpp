#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mdcnn/tensor.hpp"

namespace mdcnn {

template <typename T>
struct GradCheckResultT {
  T max_relative_error = 0;
  std::string worst_param;
};

/// Central finite differences against analytic gradients. `loss_fn` must
/// re-evaluate the scalar loss from the current values of `params`; every
/// parameter element is perturbed by +/- epsilon in turn and restored.
/// Relative error per element is |a - n| / max(|a|, |n|, 1e-12).
template <typename T>
GradCheckResultT<T> gradcheck(
    const std::function<T()>& loss_fn,
    const std::vector<std::pair<std::string, TensorT<T>*>>& params,
    const std::vector<std::pair<std::string, const TensorT<T>*>>& analytic,
    T epsilon) {
  if (!(epsilon > T(0)) || epsilon > T(0.1)) {
    throw std::invalid_argument("gradcheck epsilon must be in (0, 0.1]");
  }
  if (params.size() != analytic.size()) {
    throw std::invalid_argument("gradcheck: parameter and gradient sets differ in size");
  }
  GradCheckResultT<T> result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    TensorT<T>& theta = *params[p].second;
    const TensorT<T>& grad = *analytic[p].second;
    if (!theta.same_shape(grad)) {
      throw std::invalid_argument("gradcheck: gradient shape does not mirror parameter " +
                                  params[p].first);
    }
    for (std::int64_t i = 0; i < theta.size(); ++i) {
      const T saved = theta[i];
      theta[i] = saved + epsilon;
      const T f_plus = loss_fn();
      theta[i] = saved - epsilon;
      const T f_minus = loss_fn();
      theta[i] = saved;
      if (!std::isfinite(static_cast<double>(f_plus)) ||
          !std::isfinite(static_cast<double>(f_minus))) {
        throw std::runtime_error("gradcheck: non-finite loss while probing " + params[p].first);
      }
      const T numeric = (f_plus - f_minus) / (T(2) * epsilon);
      const T a = grad[i];
      const T denom = std::max({std::abs(a), std::abs(numeric), T(1e-12)});
      const T rel = std::abs(a - numeric) / denom;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_param = params[p].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace mdcnn
