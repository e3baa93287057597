#include "sftgan/tensor.hpp"

#include <cmath>
#include <sstream>

namespace sftgan {

std::size_t Shape::numel() const {
  std::size_t n = 1;
  for (auto d : dims_) n *= d;
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

Nchw as_nchw(const Shape& s, const char* what) {
  if (s.rank() != 4) {
    throw ShapeError(std::string(what) + ": expected rank-4 NCHW tensor, got " + s.str());
  }
  return {s[0], s[1], s[2], s[3]};
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<T>>(shape_.numel(), fill)) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<T>>(std::move(values))) {
  if (data_->size() != shape_.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_->size()) +
                     " does not match shape " + shape_.str());
  }
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (shape.numel() != numel()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

template <typename T>
static bool finite_impl(std::span<const T> v) {
  // Summing is branch-free and vectorizes; NaN/Inf anywhere poisons the sum.
  T acc = 0;
  for (T x : v) acc += x * T(0);
  return acc == T(0);
}

bool all_finite(std::span<const float> v) { return finite_impl(v); }
bool all_finite(std::span<const double> v) { return finite_impl(v); }

template class Tensor<float>;
template class Tensor<double>;

}  // namespace sftgan
