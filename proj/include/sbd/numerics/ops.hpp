#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sbd/numerics/tensor.hpp"

namespace sbd {

// Softmax along `axis` (0 or 1 for matrices, 0 for vectors), stabilized by
// subtracting the running maximum. Non-finite input throws NumericError.
template <std::floating_point T>
Tensor<T> softmax(const Tensor<T>& logits, std::size_t axis = 1);

template <std::floating_point T>
T logsumexp(std::span<const T> z);

// In-place softmax of one row; returns log-sum-exp of the row.
template <std::floating_point T>
T softmax_inplace(std::span<T> row);

// Shannon entropy in nats with 0 ln 0 = 0. `p` must be a probability vector
// (entries >= 0, sum within 1e-5 of one); otherwise NumericError.
template <std::floating_point T>
T entropy(std::span<const T> p);

template <std::floating_point T>
T entropy(const Tensor<T>& p) { return entropy<T>(p.data()); }

// Entropy of softmax(z) through H = logsumexp(z) - sum_i p_i z_i.
template <std::floating_point T>
T entropy_from_logits(std::span<const T> z);

// Mean over rows with loss_mask set of -log softmax(logits)[target]. An
// all-false mask yields 0.
template <std::floating_point T>
T cross_entropy_loss(const Tensor<T>& logits, std::span<const std::int32_t> targets,
                     std::span<const std::uint8_t> loss_mask);

template <std::floating_point T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace sbd
