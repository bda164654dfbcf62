#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "mdcnn/conv.hpp"
#include "mdcnn/layers.hpp"
#include "mdcnn/rng.hpp"
#include "mdcnn/tensor.hpp"

namespace mdcnn {

/// The learnable tensors of the classifier, in their fixed order:
/// conv1.weight, conv1.bias, conv2.weight, conv2.bias, conv3.weight,
/// conv3.bias, head.weight, head.bias. Gradients reuse this struct, so
/// gradient shapes mirror parameter shapes name for name.
template <typename T = float>
struct ModelParamsT {
  ConvSpecT<T> conv1;
  ConvSpecT<T> conv2;
  ConvSpecT<T> conv3;
  TensorT<T> head_weights;
  TensorT<T> head_bias;

  std::vector<std::pair<std::string, TensorT<T>*>> named_tensors() {
    return {{"conv1.weight", &conv1.weights}, {"conv1.bias", &conv1.bias},
            {"conv2.weight", &conv2.weights}, {"conv2.bias", &conv2.bias},
            {"conv3.weight", &conv3.weights}, {"conv3.bias", &conv3.bias},
            {"head.weight", &head_weights},   {"head.bias", &head_bias}};
  }

  std::vector<std::pair<std::string, const TensorT<T>*>> named_tensors() const {
    return {{"conv1.weight", &conv1.weights}, {"conv1.bias", &conv1.bias},
            {"conv2.weight", &conv2.weights}, {"conv2.bias", &conv2.bias},
            {"conv3.weight", &conv3.weights}, {"conv3.bias", &conv3.bias},
            {"head.weight", &head_weights},   {"head.bias", &head_bias}};
  }

  std::int64_t parameter_count() const {
    return conv1.parameter_count() + conv2.parameter_count() + conv3.parameter_count() +
           head_weights.size() + head_bias.size();
  }

  bool all_finite() const {
    for (const auto& [name, t] : named_tensors()) {
      if (!t->all_finite()) return false;
    }
    return true;
  }

  static ModelParamsT zero_like(const ModelParamsT& other) {
    ModelParamsT z;
    z.conv1 = ConvSpecT<T>::zeros(other.conv1.out_channels, other.conv1.in_channels,
                                  other.conv1.kernel_h, other.conv1.kernel_w);
    z.conv2 = ConvSpecT<T>::zeros(other.conv2.out_channels, other.conv2.in_channels,
                                  other.conv2.kernel_h, other.conv2.kernel_w);
    z.conv3 = ConvSpecT<T>::zeros(other.conv3.out_channels, other.conv3.in_channels,
                                  other.conv3.kernel_h, other.conv3.kernel_w);
    z.head_weights = TensorT<T>(other.head_weights.shape(), T(0));
    z.head_bias = TensorT<T>(other.head_bias.shape(), T(0));
    return z;
  }
};

using ModelParams = ModelParamsT<float>;
template <typename T>
using ModelGradsT = ModelParamsT<T>;
using ModelGrads = ModelParams;

/// Architecture knobs: three conv layers with a shared filter count, one
/// kernel size per layer, 2x2 pooling after every conv, flatten, scalar
/// logit head.
struct ModelArch {
  int channels = 3;
  int image_size = 140;
  int filters = 32;
  std::array<int, 3> kernel_sizes{3, 2, 3};
};

/// The per-image intermediate shapes implied by valid convolution and 2x2
/// pooling.
template <typename T>
struct ChainShapesT {
  std::vector<int> conv1_out, pool1_out, conv2_out, pool2_out, conv3_out, pool3_out;
  std::int64_t flatten_len = 0;
};

namespace detail {

inline std::pair<int, int> conv_pool_extents(int h, int w, int kh, int kw,
                                             const std::string& name) {
  if (h < kh || w < kw) {
    throw std::invalid_argument(name + ": spatial input " + std::to_string(h) + "x" +
                                std::to_string(w) + " is smaller than the kernel");
  }
  const int oh = h - kh + 1, ow = w - kw + 1;
  if (oh < 2 || ow < 2) {
    throw std::invalid_argument(name + ": conv output " + std::to_string(oh) + "x" +
                                std::to_string(ow) + " is too small to pool");
  }
  return {oh, ow};
}

}  // namespace detail

/// Walks the chain for a [c,h,w] input, throwing (naming the offending
/// tensor) when the shapes do not fit together.
template <typename T>
ChainShapesT<T> model_chain_shapes(const ModelParamsT<T>& params, int c, int h, int w) {
  if (c != params.conv1.in_channels) {
    throw std::invalid_argument("conv1.weight: input has " + std::to_string(c) +
                                " channels, expected " +
                                std::to_string(params.conv1.in_channels));
  }
  if (params.conv2.in_channels != params.conv1.out_channels) {
    throw std::invalid_argument("conv2.weight: in_channels does not match conv1 output");
  }
  if (params.conv3.in_channels != params.conv2.out_channels) {
    throw std::invalid_argument("conv3.weight: in_channels does not match conv2 output");
  }
  ChainShapesT<T> s;
  auto [o1h, o1w] = detail::conv_pool_extents(h, w, params.conv1.kernel_h,
                                              params.conv1.kernel_w, "conv1.weight");
  s.conv1_out = {params.conv1.out_channels, o1h, o1w};
  s.pool1_out = {params.conv1.out_channels, o1h / 2, o1w / 2};
  auto [o2h, o2w] = detail::conv_pool_extents(s.pool1_out[1], s.pool1_out[2],
                                              params.conv2.kernel_h, params.conv2.kernel_w,
                                              "conv2.weight");
  s.conv2_out = {params.conv2.out_channels, o2h, o2w};
  s.pool2_out = {params.conv2.out_channels, o2h / 2, o2w / 2};
  auto [o3h, o3w] = detail::conv_pool_extents(s.pool2_out[1], s.pool2_out[2],
                                              params.conv3.kernel_h, params.conv3.kernel_w,
                                              "conv3.weight");
  s.conv3_out = {params.conv3.out_channels, o3h, o3w};
  s.pool3_out = {params.conv3.out_channels, o3h / 2, o3w / 2};
  s.flatten_len = TensorT<T>::element_count(s.pool3_out);
  if (params.head_weights.size() != s.flatten_len) {
    throw std::invalid_argument(
        "head.weight: length " + std::to_string(params.head_weights.size()) +
        " does not match flattened conv output " + std::to_string(s.flatten_len));
  }
  return s;
}

/// He-uniform weights (fan_in = in_channels * kh * kw per conv, flattened
/// length for the head), zero biases. Draw order is fixed: conv1.weight,
/// conv2.weight, conv3.weight, head.weight.
template <typename T = float>
ModelParamsT<T> init_params(Rng& rng, const ModelArch& arch = {}) {
  const int f = arch.filters;
  const auto& k = arch.kernel_sizes;
  ModelParamsT<T> p;
  p.conv1 = ConvSpecT<T>(f, arch.channels, k[0], k[0],
                         rng_init_weights<T>(rng, {f, arch.channels, k[0], k[0]},
                                             static_cast<std::int64_t>(arch.channels) * k[0] * k[0]),
                         TensorT<T>({f}, T(0)));
  p.conv2 = ConvSpecT<T>(f, f, k[1], k[1],
                         rng_init_weights<T>(rng, {f, f, k[1], k[1]},
                                             static_cast<std::int64_t>(f) * k[1] * k[1]),
                         TensorT<T>({f}, T(0)));
  p.conv3 = ConvSpecT<T>(f, f, k[2], k[2],
                         rng_init_weights<T>(rng, {f, f, k[2], k[2]},
                                             static_cast<std::int64_t>(f) * k[2] * k[2]),
                         TensorT<T>({f}, T(0)));
  std::int64_t flat_len = 0;
  {
    auto [o1h, o1w] = detail::conv_pool_extents(arch.image_size, arch.image_size, k[0], k[0],
                                                "conv1.weight");
    auto [o2h, o2w] = detail::conv_pool_extents(o1h / 2, o1w / 2, k[1], k[1], "conv2.weight");
    auto [o3h, o3w] = detail::conv_pool_extents(o2h / 2, o2w / 2, k[2], k[2], "conv3.weight");
    flat_len = static_cast<std::int64_t>(f) * (o3h / 2) * (o3w / 2);
  }
  p.head_weights = rng_init_weights<T>(rng, {static_cast<int>(flat_len)}, flat_len);
  p.head_bias = TensorT<T>({1}, T(0));
  model_chain_shapes(p, arch.channels, arch.image_size, arch.image_size);
  return p;
}

/// Per-layer activations and pooling argmax positions retained by a forward
/// pass so the backward pass can be replayed exactly.
template <typename T = float>
struct ForwardTraceT {
  TensorT<T> input;
  TensorT<T> conv1_out;
  TensorT<T> pool1_out;
  std::vector<std::int64_t> pool1_argmax;
  TensorT<T> conv2_out;
  TensorT<T> pool2_out;
  std::vector<std::int64_t> pool2_argmax;
  TensorT<T> conv3_out;
  TensorT<T> pool3_out;
  std::vector<std::int64_t> pool3_argmax;
  T logit = 0;
  T prob = 0;
  bool valid = false;
};

using ForwardTrace = ForwardTraceT<float>;

/// conv1 -> ReLU -> pool -> conv2 -> ReLU -> pool -> conv3 -> ReLU -> pool
/// -> flatten -> logit head -> sigmoid, for one [C,H,W] image.
template <typename T>
ForwardTraceT<T> model_forward_one(const TensorT<T>& image, const ModelParamsT<T>& params) {
  if (image.rank() != 3) {
    throw std::invalid_argument("model forward expects a [C,H,W] image");
  }
  model_chain_shapes(params, image.extent(0), image.extent(1), image.extent(2));
  ForwardTraceT<T> t;
  t.input = image;
  t.conv1_out = conv2d_forward(image, params.conv1);
  auto p1 = maxpool2x2_forward(relu_forward(t.conv1_out));
  t.pool1_out = std::move(p1.output);
  t.pool1_argmax = std::move(p1.argmax);
  t.conv2_out = conv2d_forward(t.pool1_out, params.conv2);
  auto p2 = maxpool2x2_forward(relu_forward(t.conv2_out));
  t.pool2_out = std::move(p2.output);
  t.pool2_argmax = std::move(p2.argmax);
  t.conv3_out = conv2d_forward(t.pool2_out, params.conv3);
  auto p3 = maxpool2x2_forward(relu_forward(t.conv3_out));
  t.pool3_out = std::move(p3.output);
  t.pool3_argmax = std::move(p3.argmax);
  t.logit = logit_head_forward(flatten(t.pool3_out), params.head_weights, params.head_bias);
  t.prob = sigmoid(t.logit);
  t.valid = true;
  return t;
}

template <typename T = float>
struct BatchForwardT {
  TensorT<T> probabilities;                // [N]
  std::vector<T> logits;                   // [N]
  std::vector<ForwardTraceT<T>> traces;    // empty unless keep_trace
};

/// Batch wrapper over model_forward_one; samples are processed in index
/// order so results do not depend on scheduling.
template <typename T>
BatchForwardT<T> model_forward(const TensorT<T>& batch, const ModelParamsT<T>& params,
                               bool keep_trace = false) {
  if (batch.rank() != 4) {
    throw std::invalid_argument("model forward expects a batch [N,C,H,W]");
  }
  const int n = batch.extent(0), c = batch.extent(1), h = batch.extent(2), w = batch.extent(3);
  model_chain_shapes(params, c, h, w);
  BatchForwardT<T> out;
  out.probabilities = TensorT<T>({n}, T(0));
  out.logits.resize(static_cast<std::size_t>(n));
  const std::int64_t stride = static_cast<std::int64_t>(c) * h * w;
  for (int s = 0; s < n; ++s) {
    TensorT<T> image({c, h, w},
                     std::span<const T>(batch.data() + s * stride, static_cast<std::size_t>(stride)));
    ForwardTraceT<T> t = model_forward_one(image, params);
    out.probabilities[s] = t.prob;
    out.logits[static_cast<std::size_t>(s)] = t.logit;
    if (keep_trace) out.traces.push_back(std::move(t));
  }
  return out;
}

template <typename T>
void accumulate(ConvSpecT<T>& grads, const ConvGradsT<T>& delta) {
  T* w = grads.weights.data();
  const T* dw = delta.weight_grad.data();
  for (std::int64_t i = 0; i < grads.weights.size(); ++i) w[i] += dw[i];
  T* b = grads.bias.data();
  const T* db = delta.bias_grad.data();
  for (std::int64_t i = 0; i < grads.bias.size(); ++i) b[i] += db[i];
}

/// Full-chain gradients for one sample, from the gradient on the logit.
/// Accumulates into `grads` (shapes mirror the parameters name for name).
template <typename T>
void model_backward_logit(const ModelParamsT<T>& params, const ForwardTraceT<T>& trace,
                          T logit_grad, ModelGradsT<T>& grads) {
  if (!trace.valid) {
    throw std::invalid_argument("model backward called without a forward trace");
  }
  // Head.
  {
    const TensorT<T> v = flatten(trace.pool3_out);
    T* wg = grads.head_weights.data();
    const T* pv = v.data();
    for (std::int64_t i = 0; i < v.size(); ++i) wg[i] += logit_grad * pv[i];
    grads.head_bias[0] += logit_grad;
  }
  TensorT<T> g = scale(params.head_weights, logit_grad);
  g = unflatten(g, trace.pool3_out.shape());
  // Stage 3.
  g = maxpool2x2_backward(trace.pool3_argmax, trace.conv3_out.shape(), g);
  g = relu_backward(trace.conv3_out, g);
  {
    auto cg = conv2d_backward(trace.pool2_out, params.conv3, g, /*want_input_grad=*/true);
    accumulate(grads.conv3, cg);
    g = std::move(cg.input_grad);
  }
  // Stage 2.
  g = maxpool2x2_backward(trace.pool2_argmax, trace.conv2_out.shape(), g);
  g = relu_backward(trace.conv2_out, g);
  {
    auto cg = conv2d_backward(trace.pool1_out, params.conv2, g, /*want_input_grad=*/true);
    accumulate(grads.conv2, cg);
    g = std::move(cg.input_grad);
  }
  // Stage 1; the image gradient is not needed.
  g = maxpool2x2_backward(trace.pool1_argmax, trace.conv1_out.shape(), g);
  g = relu_backward(trace.conv1_out, g);
  {
    auto cg = conv2d_backward(trace.input, params.conv1, g, /*want_input_grad=*/false);
    accumulate(grads.conv1, cg);
  }
}

/// Gradients of one sample with respect to the probability output; applies
/// the sigmoid derivative and defers to the logit path.
template <typename T>
ModelGradsT<T> model_backward(const ModelParamsT<T>& params, const ForwardTraceT<T>& trace,
                              T prob_grad) {
  ModelGradsT<T> grads = ModelParamsT<T>::zero_like(params);
  const T p = trace.prob;
  model_backward_logit(params, trace, prob_grad * p * (T(1) - p), grads);
  return grads;
}

}  // namespace mdcnn
