#include "sbd/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sbd/errors.hpp"
#include "sbd/numerics/kernels.hpp"

namespace sbd {

template <std::floating_point T>
T softmax_inplace(std::span<T> row) {
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : row) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite logit");
    mx = std::max(mx, v);
  }
  T sum{0};
  for (T& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  const T inv = T{1} / sum;
  for (T& v : row) v *= inv;
  return mx + std::log(sum);
}

template <std::floating_point T>
Tensor<T> softmax(const Tensor<T>& logits, std::size_t axis) {
  if (logits.rank() == 0 || logits.rank() > 2) throw NumericError("softmax: rank must be 1 or 2");
  if (logits.rank() == 1 && axis != 0) throw NumericError("softmax: axis out of range for a vector");
  if (logits.rank() == 2 && axis > 1) throw NumericError("softmax: axis out of range for a matrix");
  logits.check_finite("softmax");

  Tensor<T> out = logits;
  if (logits.rank() == 1 || axis == 1) {
    for (std::size_t r = 0; r < out.rows(); ++r) softmax_inplace<T>(out.row(r));
    return out;
  }
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  std::vector<T> column(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = logits(r, c);
    softmax_inplace<T>(std::span<T>(column));
    for (std::size_t r = 0; r < rows; ++r) out(r, c) = column[r];
  }
  return out;
}

template <std::floating_point T>
T logsumexp(std::span<const T> z) {
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : z) {
    if (!std::isfinite(v)) throw NumericError("logsumexp: non-finite input");
    mx = std::max(mx, v);
  }
  T sum{0};
  for (T v : z) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

template <std::floating_point T>
T entropy(std::span<const T> p) {
  T total{0};
  T h{0};
  for (T v : p) {
    if (!std::isfinite(v)) throw NumericError("entropy: non-finite probability");
    if (v < T{0}) throw NumericError("entropy: negative probability " + std::to_string(v));
    total += v;
    if (v > T{0}) h -= v * std::log(v);
  }
  if (std::abs(total - T{1}) > T(1e-5)) {
    throw NumericError("entropy: probabilities sum to " + std::to_string(total));
  }
  return std::max(h, T{0});
}

template <std::floating_point T>
T entropy_from_logits(std::span<const T> z) {
  const T lse = logsumexp<T>(z);
  T expected{0};
  for (T v : z) expected += std::exp(v - lse) * v;
  return std::max(lse - expected, T{0});
}

template <std::floating_point T>
T cross_entropy_loss(const Tensor<T>& logits, std::span<const std::int32_t> targets,
                     std::span<const std::uint8_t> loss_mask) {
  if (targets.size() != logits.rows() || loss_mask.size() != logits.rows()) {
    throw NumericError("cross_entropy_loss: targets/mask length must equal the number of rows");
  }
  T sum{0};
  std::size_t count = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (!loss_mask[r]) continue;
    const auto row = logits.row(r);
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= row.size()) {
      throw NumericError("cross_entropy_loss: target out of vocabulary");
    }
    sum += logsumexp<T>(row) - row[static_cast<std::size_t>(targets[r])];
    ++count;
  }
  return count == 0 ? T{0} : sum / static_cast<T>(count);
}

template <std::floating_point T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) throw NumericError("matmul: inner dimensions differ");
  Tensor<T> out(Shape{a.rows(), b.cols()});
  kernels::gemm_nn(a.raw(), b.raw(), out.raw(), a.rows(), a.cols(), b.cols(), false);
  return out;
}

#define SBD_INSTANTIATE(T)                                                                     \
  template T softmax_inplace<T>(std::span<T>);                                                \
  template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);                               \
  template T logsumexp<T>(std::span<const T>);                                                 \
  template T entropy<T>(std::span<const T>);                                                   \
  template T entropy_from_logits<T>(std::span<const T>);                                       \
  template T cross_entropy_loss<T>(const Tensor<T>&, std::span<const std::int32_t>,            \
                                   std::span<const std::uint8_t>);                             \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);

SBD_INSTANTIATE(float)
SBD_INSTANTIATE(double)

#undef SBD_INSTANTIATE

}  // namespace sbd
