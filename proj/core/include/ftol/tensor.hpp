#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ftol/error.hpp"

namespace ftol {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape);

// Dense row-major array. Image batches use (batch, channels, height, width).
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h,
              std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  // Number of elements in one batch entry.
  std::size_t item_size() const {
    return shape_.empty() || shape_[0] == 0 ? 0 : data_.size() / shape_[0];
  }
  std::span<T> item(std::size_t n) {
    return std::span<T>(data_).subspan(n * item_size(), item_size());
  }
  std::span<const T> item(std::size_t n) const {
    return std::span<const T>(data_).subspan(n * item_size(), item_size());
  }

  void reshape(Shape shape) {
    if (shape_size(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                       shape_string(shape));
    }
    shape_ = std::move(shape);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void require_finite(std::string_view where) const {
    if (!all_finite()) {
      throw NumericalError("non-finite value in " + std::string(where));
    }
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename Range>
double l2_norm(const Range& v) {
  double acc = 0.0;
  for (auto x : v) acc += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(acc);
}

template <typename Range>
double linf_norm(const Range& v) {
  double m = 0.0;
  for (auto x : v) m = std::max(m, std::abs(static_cast<double>(x)));
  return m;
}

// Stack batch entries (each of shape `item_shape`) into one tensor.
template <typename T>
BasicTensor<T> stack_items(const std::vector<std::span<const T>>& items,
                           const Shape& item_shape) {
  Shape shape{items.size()};
  shape.insert(shape.end(), item_shape.begin(), item_shape.end());
  std::vector<T> data;
  data.reserve(shape_size(shape));
  for (auto item : items) {
    if (item.size() != shape_size(item_shape)) {
      throw ShapeError("stack_items: item length mismatch");
    }
    data.insert(data.end(), item.begin(), item.end());
  }
  return BasicTensor<T>(std::move(shape), std::move(data));
}

}  // namespace ftol
