#include <limits>
#include "sbd/numerics/tensor.hpp"

#include <cmath>
#include <string>

#include "sbd/errors.hpp"

namespace sbd {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

template <std::floating_point T>
Tensor<T>::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), T{0}) {}

template <std::floating_point T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw NumericError("tensor shape product " + std::to_string(shape_size(shape_)) +
                       " does not match data length " + std::to_string(data_.size()));
  }
}

template <std::floating_point T>
Tensor<T>::Tensor(Shape shape, std::initializer_list<T> data)
    : Tensor(std::move(shape), std::vector<T>(data)) {}

template <std::floating_point T>
Tensor<T> Tensor<T>::vector(std::vector<T> data) {
  const std::size_t n = data.size();
  return Tensor(Shape{n}, std::move(data));
}

template <std::floating_point T>
std::size_t Tensor<T>::rows() const noexcept {
  if (shape_.empty()) return 1;
  if (shape_.size() == 1) return 1;
  return shape_size(shape_) / shape_.back();
}

template <std::floating_point T>
std::size_t Tensor<T>::cols() const noexcept {
  return shape_.empty() ? 1 : shape_.back();
}

template <std::floating_point T>
void Tensor<T>::fill(T value) noexcept {
  for (T& x : data_) x = value;
}

template <std::floating_point T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& other) {
  if (other.data_.size() != data_.size()) {
    throw NumericError("tensor += with mismatched sizes");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <std::floating_point T>
void Tensor<T>::check_finite(std::string_view op) const {
  // Branch-free scan for the common all-finite case; NaN fails the compare.
  constexpr T kMax = std::numeric_limits<T>::max();
  bool ok = true;
  for (T x : data_) ok &= (x <= kMax) & (x >= -kMax);
  if (ok) return;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError(std::string(op) + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace sbd
