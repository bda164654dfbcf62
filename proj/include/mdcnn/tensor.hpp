#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdcnn {

/// Dense row-major tensor of rank 1..4. The single value type used for
/// images, activations, weights and gradients throughout the library.
/// Training instantiates T = float; the gradient-check harness re-runs the
/// same kernels with T = double.
template <typename T = float>
class TensorT {
 public:
  TensorT() = default;

  TensorT(std::vector<int> shape, T fill) : shape_(std::move(shape)) {
    validate_shape();
    if (!std::isfinite(static_cast<double>(fill))) {
      throw std::invalid_argument("tensor fill value is not finite");
    }
    data_.assign(static_cast<std::size_t>(element_count(shape_)), fill);
  }

  TensorT(std::vector<int> shape, std::span<const T> values)
      : shape_(std::move(shape)) {
    validate_shape();
    const auto n = static_cast<std::size_t>(element_count(shape_));
    if (values.size() != n) {
      throw std::invalid_argument(
          "tensor data length " + std::to_string(values.size()) +
          " does not match shape product " + std::to_string(n));
    }
    data_.assign(values.begin(), values.end());
    for (const T v : data_) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw std::invalid_argument("tensor value sequence contains a non-finite value");
      }
    }
  }

  TensorT(std::vector<int> shape, std::initializer_list<T> values)
      : TensorT(std::move(shape), std::span<const T>(values.begin(), values.size())) {}

  static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape), T(0)); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int extent(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  T& at(std::initializer_list<int> idx) { return data_[static_cast<std::size_t>(flat_index(shape_, idx))]; }
  const T& at(std::initializer_list<int> idx) const {
    return data_[static_cast<std::size_t>(flat_index(shape_, idx))];
  }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (const T v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  /// Row-major flat offset of a multi-index; inverse of unflat_index.
  static std::int64_t flat_index(const std::vector<int>& shape, std::span<const int> idx) {
    if (idx.size() != shape.size()) {
      throw std::invalid_argument("index rank does not match tensor rank");
    }
    std::int64_t flat = 0;
    for (std::size_t a = 0; a < shape.size(); ++a) {
      if (idx[a] < 0 || idx[a] >= shape[a]) {
        throw std::out_of_range("tensor index out of range on axis " + std::to_string(a));
      }
      flat = flat * shape[a] + idx[a];
    }
    return flat;
  }

  static std::int64_t flat_index(const std::vector<int>& shape, std::initializer_list<int> idx) {
    return flat_index(shape, std::span<const int>(idx.begin(), idx.size()));
  }

  static std::vector<int> unflat_index(const std::vector<int>& shape, std::int64_t flat) {
    std::vector<int> idx(shape.size(), 0);
    for (std::size_t a = shape.size(); a-- > 0;) {
      idx[a] = static_cast<int>(flat % shape[a]);
      flat /= shape[a];
    }
    return idx;
  }

  static std::int64_t element_count(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (const int e : shape) n *= e;
    return n;
  }

 private:
  void validate_shape() const {
    if (shape_.empty() || shape_.size() > 4) {
      throw std::invalid_argument("tensor rank must be between 1 and 4, got " +
                                  std::to_string(shape_.size()));
    }
    for (const int e : shape_) {
      if (e <= 0) {
        throw std::invalid_argument("tensor extents must be positive, got " + std::to_string(e));
      }
    }
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;

enum class ElemOp { add, sub, mul };

template <typename T>
TensorT<T> elementwise(const TensorT<T>& a, const TensorT<T>& b, ElemOp op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("elementwise operands must have identical shapes");
  }
  TensorT<T> out = a;
  const T* pb = b.data();
  T* po = out.data();
  const std::int64_t n = out.size();
  switch (op) {
    case ElemOp::add:
      for (std::int64_t i = 0; i < n; ++i) po[i] += pb[i];
      break;
    case ElemOp::sub:
      for (std::int64_t i = 0; i < n; ++i) po[i] -= pb[i];
      break;
    case ElemOp::mul:
      for (std::int64_t i = 0; i < n; ++i) po[i] *= pb[i];
      break;
  }
  if (!out.all_finite()) {
    throw std::runtime_error("elementwise result contains a non-finite value");
  }
  return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) { return elementwise(a, b, ElemOp::add); }
template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) { return elementwise(a, b, ElemOp::sub); }
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) { return elementwise(a, b, ElemOp::mul); }

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  if (!std::isfinite(static_cast<double>(s))) {
    throw std::invalid_argument("scale factor is not finite");
  }
  TensorT<T> out = a;
  for (T& v : out.values()) v *= s;
  if (!out.all_finite()) {
    throw std::runtime_error("scale result contains a non-finite value");
  }
  return out;
}

}  // namespace mdcnn
