#pragma once

#include <string>

#include "mdcnn/image.hpp"
#include "mdcnn/tensor.hpp"

namespace mdcnn {

/// Exact lossless rotation by k * 90 degrees clockwise, k in {1,2,3}.
/// k in {1,3} swaps the spatial extents.
template <typename T>
TensorT<T> augment_rotate(const TensorT<T>& img, int k) {
  if (img.rank() != 3) {
    throw std::invalid_argument("rotate expects a [C,H,W] tensor");
  }
  if (k < 1 || k > 3) {
    throw std::invalid_argument("rotation count must be 1, 2 or 3");
  }
  const int c = img.extent(0), h = img.extent(1), w = img.extent(2);
  const int oh = (k == 2) ? h : w;
  const int ow = (k == 2) ? w : h;
  TensorT<T> out({c, oh, ow}, T(0));
  for (int ci = 0; ci < c; ++ci) {
    const T* src = img.data() + static_cast<std::int64_t>(ci) * h * w;
    T* dst = out.data() + static_cast<std::int64_t>(ci) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        std::int64_t s;
        switch (k) {
          case 1:  s = static_cast<std::int64_t>(h - 1 - x) * w + y; break;
          case 2:  s = static_cast<std::int64_t>(h - 1 - y) * w + (w - 1 - x); break;
          default: s = static_cast<std::int64_t>(x) * w + (w - 1 - y); break;
        }
        dst[static_cast<std::int64_t>(y) * ow + x] = src[s];
      }
    }
  }
  return out;
}

struct CropRegion {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

/// Extracts a region and resizes it to the standard input size. The region
/// must lie within the image and span at least 8x8 source pixels.
template <typename T>
TensorT<T> augment_crop(const TensorT<T>& img, const CropRegion& r, int out_size = kImageSize) {
  if (img.rank() != 3) {
    throw std::invalid_argument("crop expects a [C,H,W] tensor");
  }
  const int c = img.extent(0), h = img.extent(1), w = img.extent(2);
  if (r.height < 8 || r.width < 8) {
    throw std::invalid_argument("crop region must span at least 8x8 pixels");
  }
  if (r.top < 0 || r.left < 0 || r.top + r.height > h || r.left + r.width > w) {
    throw std::invalid_argument("crop region lies outside the image");
  }
  TensorT<T> patch({c, r.height, r.width}, T(0));
  for (int ci = 0; ci < c; ++ci) {
    const T* src = img.data() + (static_cast<std::int64_t>(ci) * h + r.top) * w + r.left;
    T* dst = patch.data() + static_cast<std::int64_t>(ci) * r.height * r.width;
    for (int y = 0; y < r.height; ++y) {
      for (int x = 0; x < r.width; ++x) {
        dst[static_cast<std::int64_t>(y) * r.width + x] = src[static_cast<std::int64_t>(y) * w + x];
      }
    }
  }
  return resize_bilinear(patch, out_size, out_size);
}

}  // namespace mdcnn
