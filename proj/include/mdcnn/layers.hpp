#pragma once

#include <cmath>
#include <utility>

#include "mdcnn/tensor.hpp"

namespace mdcnn {

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& x) {
  TensorT<T> out = x;
  for (T& v : out.values()) v = v > T(0) ? v : T(0);
  return out;
}

/// Passes the upstream gradient where x > 0, zero where x <= 0
/// (subgradient 0 at exactly 0).
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& upstream) {
  if (!x.same_shape(upstream)) {
    throw std::invalid_argument("relu backward shapes do not match");
  }
  TensorT<T> out = upstream;
  const T* px = x.data();
  T* po = out.data();
  for (std::int64_t i = 0; i < out.size(); ++i) {
    if (px[i] <= T(0)) po[i] = T(0);
  }
  return out;
}

template <typename T>
struct PoolResultT {
  TensorT<T> output;
  // Flat index into the input [C,H,W] of each window's maximum; ties break
  // toward the lowest flat index, so the backward route is deterministic.
  std::vector<std::int64_t> argmax;
};

/// Non-overlapping 2x2 max pooling, stride 2. An odd trailing row or column
/// is dropped.
template <typename T>
PoolResultT<T> maxpool2x2_forward(const TensorT<T>& x) {
  if (x.rank() != 3) {
    throw std::invalid_argument("maxpool expects a [C,H,W] tensor");
  }
  const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
  if (h < 2 || w < 2) {
    throw std::invalid_argument("maxpool needs spatial extents of at least 2");
  }
  const int oh = h / 2, ow = w / 2;
  PoolResultT<T> res;
  res.output = TensorT<T>({c, oh, ow}, T(0));
  res.argmax.assign(static_cast<std::size_t>(res.output.size()), 0);
  const T* in = x.data();
  T* out = res.output.data();
  std::int64_t oi = 0;
  for (int ci = 0; ci < c; ++ci) {
    const std::int64_t plane = static_cast<std::int64_t>(ci) * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int xo = 0; xo < ow; ++xo) {
        const std::int64_t base = plane + static_cast<std::int64_t>(2 * y) * w + 2 * xo;
        std::int64_t best = base;
        T best_v = in[base];
        const std::int64_t cand[3] = {base + 1, base + w, base + w + 1};
        for (const std::int64_t idx : cand) {
          if (in[idx] > best_v) {
            best_v = in[idx];
            best = idx;
          }
        }
        out[oi] = best_v;
        res.argmax[static_cast<std::size_t>(oi)] = best;
        ++oi;
      }
    }
  }
  return res;
}

/// Routes each upstream value to its window's argmax position; every other
/// input cell, including dropped rows/columns, receives exactly 0.
template <typename T>
TensorT<T> maxpool2x2_backward(const std::vector<std::int64_t>& argmax,
                               const std::vector<int>& input_shape,
                               const TensorT<T>& upstream) {
  if (static_cast<std::int64_t>(argmax.size()) != upstream.size()) {
    throw std::invalid_argument("pool argmax trace does not match upstream gradient");
  }
  TensorT<T> out(input_shape, T(0));
  const std::int64_t n = out.size();
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] < 0 || argmax[i] >= n) {
      throw std::invalid_argument("pool argmax trace indexes outside the input");
    }
    out[argmax[i]] += upstream[static_cast<std::int64_t>(i)];
  }
  return out;
}

/// Row-major [C,H,W] -> [C*H*W] bijection.
template <typename T>
TensorT<T> flatten(const TensorT<T>& x) {
  if (x.rank() != 3) {
    throw std::invalid_argument("flatten expects a [C,H,W] tensor");
  }
  return TensorT<T>({static_cast<int>(x.size())}, x.values());
}

template <typename T>
TensorT<T> unflatten(const TensorT<T>& x, const std::vector<int>& shape) {
  if (TensorT<T>::element_count(shape) != x.size()) {
    throw std::invalid_argument("unflatten target shape does not match length");
  }
  return TensorT<T>(shape, x.values());
}

/// Scalar logit head: z = w . v + b.
template <typename T>
T logit_head_forward(const TensorT<T>& v, const TensorT<T>& w, const TensorT<T>& b) {
  if (v.size() != w.size()) {
    throw std::invalid_argument("logit head input and weight lengths differ");
  }
  if (b.size() != 1) {
    throw std::invalid_argument("logit head bias must hold a single value");
  }
  T z = b[0];
  const T* pv = v.data();
  const T* pw = w.data();
  for (std::int64_t i = 0; i < v.size(); ++i) z += pw[i] * pv[i];
  return z;
}

template <typename T>
struct HeadGradsT {
  TensorT<T> input_grad;
  TensorT<T> weight_grad;
  T bias_grad = 0;
};

template <typename T>
HeadGradsT<T> logit_head_backward(const TensorT<T>& v, const TensorT<T>& w, T upstream) {
  if (v.size() != w.size()) {
    throw std::invalid_argument("logit head input and weight lengths differ");
  }
  HeadGradsT<T> g;
  g.input_grad = scale(w, upstream);
  g.weight_grad = scale(v, upstream);
  g.bias_grad = upstream;
  return g;
}

/// Logistic sigmoid 1 / (1 + e^-z) in the branch-free stable form
/// 0.5 * (1 + tanh(z/2)); no overflow for any finite z.
template <typename T>
T sigmoid(T z) {
  return T(0.5) * (T(1) + std::tanh(z * T(0.5)));
}

}  // namespace mdcnn
