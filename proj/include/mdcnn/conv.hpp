#pragma once

#include <string>

#include "mdcnn/tensor.hpp"

namespace mdcnn {

/// One convolution layer: valid cross-correlation, stride 1, no padding.
/// weights are [out, in, kh, kw], bias is [out].
template <typename T = float>
struct ConvSpecT {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  TensorT<T> weights;
  TensorT<T> bias;

  ConvSpecT() = default;

  ConvSpecT(int out_c, int in_c, int kh, int kw, TensorT<T> w, TensorT<T> b)
      : out_channels(out_c), in_channels(in_c), kernel_h(kh), kernel_w(kw),
        weights(std::move(w)), bias(std::move(b)) {
    if (out_c <= 0 || in_c <= 0 || kh <= 0 || kw <= 0) {
      throw std::invalid_argument("conv spec extents must be positive");
    }
    const std::vector<int> want{out_c, in_c, kh, kw};
    if (weights.shape() != want) {
      throw std::invalid_argument("conv weight shape does not match [out,in,kh,kw]");
    }
    if (bias.shape() != std::vector<int>{out_c}) {
      throw std::invalid_argument("conv bias length does not match out_channels");
    }
  }

  static ConvSpecT zeros(int out_c, int in_c, int kh, int kw) {
    return ConvSpecT(out_c, in_c, kh, kw,
                     TensorT<T>({out_c, in_c, kh, kw}, T(0)),
                     TensorT<T>({out_c}, T(0)));
  }

  std::int64_t parameter_count() const { return weights.size() + bias.size(); }
};

using ConvSpec = ConvSpecT<float>;

namespace detail {

template <typename T>
void conv2d_forward_plane(const T* in, int in_c, int h, int w,
                          const ConvSpecT<T>& spec, T* out) {
  const int kh = spec.kernel_h, kw = spec.kernel_w;
  const int oh = h - kh + 1, ow = w - kw + 1;
  const T* wgt = spec.weights.data();
  const T* bias = spec.bias.data();
  for (int o = 0; o < spec.out_channels; ++o) {
    T* out_plane = out + static_cast<std::int64_t>(o) * oh * ow;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) {
      out_plane[i] = bias[o];
    }
    for (int c = 0; c < in_c; ++c) {
      const T* in_plane = in + static_cast<std::int64_t>(c) * h * w;
      for (int ki = 0; ki < kh; ++ki) {
        for (int kj = 0; kj < kw; ++kj) {
          const T wv = wgt[((static_cast<std::int64_t>(o) * in_c + c) * kh + ki) * kw + kj];
          for (int y = 0; y < oh; ++y) {
            const T* src = in_plane + static_cast<std::int64_t>(y + ki) * w + kj;
            T* dst = out_plane + static_cast<std::int64_t>(y) * ow;
            for (int x = 0; x < ow; ++x) {
              dst[x] += wv * src[x];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_plane(const T* in, int in_c, int h, int w,
                           const ConvSpecT<T>& spec, const T* grad,
                           T* in_grad, T* w_grad, T* b_grad) {
  const int kh = spec.kernel_h, kw = spec.kernel_w;
  const int oh = h - kh + 1, ow = w - kw + 1;
  const T* wgt = spec.weights.data();
  for (int o = 0; o < spec.out_channels; ++o) {
    const T* g_plane = grad + static_cast<std::int64_t>(o) * oh * ow;
    T bsum = 0;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) {
      bsum += g_plane[i];
    }
    b_grad[o] += bsum;
    for (int c = 0; c < in_c; ++c) {
      const T* in_plane = in + static_cast<std::int64_t>(c) * h * w;
      T* ig_plane = in_grad ? in_grad + static_cast<std::int64_t>(c) * h * w : nullptr;
      for (int ki = 0; ki < kh; ++ki) {
        for (int kj = 0; kj < kw; ++kj) {
          const std::int64_t widx =
              ((static_cast<std::int64_t>(o) * in_c + c) * kh + ki) * kw + kj;
          T wsum = 0;
          for (int y = 0; y < oh; ++y) {
            const T* src = in_plane + static_cast<std::int64_t>(y + ki) * w + kj;
            const T* g = g_plane + static_cast<std::int64_t>(y) * ow;
            for (int x = 0; x < ow; ++x) {
              wsum += g[x] * src[x];
            }
          }
          w_grad[widx] += wsum;
          if (ig_plane) {
            const T wv = wgt[widx];
            for (int y = 0; y < oh; ++y) {
              T* dst = ig_plane + static_cast<std::int64_t>(y + ki) * w + kj;
              const T* g = g_plane + static_cast<std::int64_t>(y) * ow;
              for (int x = 0; x < ow; ++x) {
                dst[x] += wv * g[x];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void check_conv_input(const TensorT<T>& input, const ConvSpecT<T>& spec) {
  if (input.rank() != 3 && input.rank() != 4) {
    throw std::invalid_argument("conv input must be [C,H,W] or [N,C,H,W]");
  }
  const int off = input.rank() - 3;
  if (input.extent(off) != spec.in_channels) {
    throw std::invalid_argument("conv input has " + std::to_string(input.extent(off)) +
                                " channels, spec expects " + std::to_string(spec.in_channels));
  }
  if (input.extent(off + 1) < spec.kernel_h || input.extent(off + 2) < spec.kernel_w) {
    throw std::invalid_argument("conv input spatial extents are smaller than the kernel");
  }
}

}  // namespace detail

/// Valid cross-correlation, stride 1:
///   out[o,y,x] = bias[o] + sum_{c,i,j} input[c,y+i,x+j] * weights[o,c,i,j]
/// Accepts a single image [C,H,W] or a batch [N,C,H,W]; output spatial size
/// is (H-kh+1) x (W-kw+1).
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const ConvSpecT<T>& spec) {
  detail::check_conv_input(input, spec);
  const int off = input.rank() - 3;
  const int n = off ? input.extent(0) : 1;
  const int h = input.extent(off + 1), w = input.extent(off + 2);
  const int oh = h - spec.kernel_h + 1, ow = w - spec.kernel_w + 1;

  std::vector<int> out_shape = off ? std::vector<int>{n, spec.out_channels, oh, ow}
                                   : std::vector<int>{spec.out_channels, oh, ow};
  TensorT<T> out(std::move(out_shape), T(0));
  const std::int64_t in_stride = static_cast<std::int64_t>(spec.in_channels) * h * w;
  const std::int64_t out_stride = static_cast<std::int64_t>(spec.out_channels) * oh * ow;
  for (int s = 0; s < n; ++s) {
    detail::conv2d_forward_plane(input.data() + s * in_stride, spec.in_channels, h, w,
                                 spec, out.data() + s * out_stride);
  }
  return out;
}

template <typename T>
struct ConvGradsT {
  TensorT<T> input_grad;
  TensorT<T> weight_grad;
  TensorT<T> bias_grad;
};

/// Exact gradients of conv2d_forward for a single image [C,H,W].
/// bias_grad[o] = sum of the upstream plane o; set want_input_grad = false to
/// skip the input gradient (unneeded for the first layer).
template <typename T>
ConvGradsT<T> conv2d_backward(const TensorT<T>& input, const ConvSpecT<T>& spec,
                              const TensorT<T>& upstream, bool want_input_grad = true) {
  detail::check_conv_input(input, spec);
  if (input.rank() != 3) {
    throw std::invalid_argument("conv2d_backward expects a single image [C,H,W]");
  }
  const int h = input.extent(1), w = input.extent(2);
  const int oh = h - spec.kernel_h + 1, ow = w - spec.kernel_w + 1;
  if (upstream.shape() != std::vector<int>{spec.out_channels, oh, ow}) {
    throw std::invalid_argument("upstream gradient shape does not match conv output");
  }
  ConvGradsT<T> grads;
  grads.weight_grad = TensorT<T>(spec.weights.shape(), T(0));
  grads.bias_grad = TensorT<T>(spec.bias.shape(), T(0));
  if (want_input_grad) {
    grads.input_grad = TensorT<T>(input.shape(), T(0));
  }
  detail::conv2d_backward_plane(input.data(), spec.in_channels, h, w, spec, upstream.data(),
                                want_input_grad ? grads.input_grad.data() : nullptr,
                                grads.weight_grad.data(), grads.bias_grad.data());
  return grads;
}

}  // namespace mdcnn
