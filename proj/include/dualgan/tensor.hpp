#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualgan {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Global switch for NaN/Inf detection on every op output. On by default in
/// debug builds, off in release builds.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

/// Dense row-major array. T is float for training, double for the numeric
/// verification mode.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_size(shape_)), fill) {}
  BasicTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_size(shape_)) {
      throw ShapeError("tensor: " + std::to_string(data_.size()) + " values do not fill shape " +
                       shape_string(shape_));
    }
  }

  static BasicTensor scalar(T v) { return BasicTensor(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t dim(std::int64_t axis) const {
    return shape_.at(static_cast<std::size_t>(axis < 0 ? rank() + axis : axis));
  }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  /// Scalar value of a one-element tensor.
  T item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  BasicTensor reshaped(Shape shape) const {
    if (shape_size(shape) != size()) {
      throw ShapeError("reshape " + shape_string(shape_) + " -> " + shape_string(shape));
    }
    return BasicTensor(std::move(shape), data_);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const BasicTensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename T>
bool all_finite(const BasicTensor<T>& t);

/// Elementwise precision conversion.
template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& t) {
  std::vector<To> out(t.storage().begin(), t.storage().end());
  return BasicTensor<To>(t.shape(), std::move(out));
}

/// Four-image 2x2 mosaic: each argument is [H,W,C] or [N,H,W,C]; output doubles
/// both spatial extents. Quadrant order is top-left, top-right, bottom-left,
/// bottom-right.
template <typename T>
BasicTensor<T> pack2x2(const BasicTensor<T>& top_left, const BasicTensor<T>& top_right,
                       const BasicTensor<T>& bottom_left, const BasicTensor<T>& bottom_right);

/// Inverse of pack2x2: returns quadrants in the same order.
template <typename T>
std::vector<BasicTensor<T>> unpack2x2(const BasicTensor<T>& packed);

/// One element (or contiguous range) of the leading axis.
template <typename T>
BasicTensor<T> slice_leading(const BasicTensor<T>& t, std::int64_t begin, std::int64_t end);

/// Stack equally shaped tensors along a new leading axis.
template <typename T>
BasicTensor<T> stack(std::span<const BasicTensor<T>> items);

}  // namespace dualgan
