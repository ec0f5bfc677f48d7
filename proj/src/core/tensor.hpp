#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace pipofan {

// Dense row-major tensor. Last axis is contiguous; image tensors use
// (N, C, H, W) and volumes use (Z, Y, X).
template <class T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), T{});
  }

  Tensor(std::vector<int64_t> shape, T fill) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), fill);
  }

  Tensor(std::vector<int64_t> shape, std::vector<T> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (count(shape_) != static_cast<int64_t>(data_.size()))
      throw std::invalid_argument("tensor: value count does not match shape");
  }

  static int64_t count(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d < 0) throw std::invalid_argument("tensor: negative extent");
      n *= d;
    }
    return n;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int dim() const { return static_cast<int>(shape_.size()); }
  int64_t size(int axis) const { return shape_.at(static_cast<size_t>(axis)); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& at(int64_t a, int64_t b) {
    assert(dim() == 2);
    return data_[static_cast<size_t>(a * shape_[1] + b)];
  }
  const T& at(int64_t a, int64_t b) const {
    return const_cast<Tensor*>(this)->at(a, b);
  }
  T& at(int64_t a, int64_t b, int64_t c) {
    assert(dim() == 3);
    return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
  }
  const T& at(int64_t a, int64_t b, int64_t c) const {
    return const_cast<Tensor*>(this)->at(a, b, c);
  }
  T& at(int64_t a, int64_t b, int64_t c, int64_t d) {
    assert(dim() == 4);
    return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
  }
  const T& at(int64_t a, int64_t b, int64_t c, int64_t d) const {
    return const_cast<Tensor*>(this)->at(a, b, c, d);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void reshape(std::vector<int64_t> shape) {
    if (count(shape) != numel())
      throw std::invalid_argument("tensor: reshape changes element count");
    shape_ = std::move(shape);
  }

  // Reallocates only when the element count changes.
  void resize(std::vector<int64_t> shape) {
    int64_t n = count(shape);
    if (n != numel()) data_.assign(static_cast<size_t>(n), T{});
    shape_ = std::move(shape);
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

 private:
  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

inline std::string shape_string(const std::vector<int64_t>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

}  // namespace pipofan
