#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sftgan {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an op would emit NaN/Inf, or a gradient is not finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {}
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  std::size_t numel() const;
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::string str() const;

  bool operator==(const Shape&) const = default;

 private:
  std::vector<std::size_t> dims_;
};

/// Extents of a rank-4 batch x channel x height x width tensor.
struct Nchw {
  std::size_t n, c, h, w;
  std::size_t plane() const { return h * w; }
  std::size_t numel() const { return n * c * h * w; }
};

Nchw as_nchw(const Shape& s, const char* what);

/// Dense row-major array. Copies share storage; the data is treated as
/// immutable except through mutable_data(), which optimizers use between
/// graph lifetimes.
template <typename T>
class Tensor {
 public:
  Tensor() : data_(std::make_shared<std::vector<T>>()) {}
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_->size(); }
  std::span<const T> data() const { return *data_; }
  std::span<T> mutable_data() { return *data_; }
  const T& operator[](std::size_t i) const { return (*data_)[i]; }

  /// Deep copy with independent storage.
  Tensor clone() const { return Tensor(shape_, *data_); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_->begin(), data_->end());
    return Tensor<U>(shape_, std::move(out));
  }

  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
};

bool all_finite(std::span<const float> v);
bool all_finite(std::span<const double> v);

}  // namespace sftgan
