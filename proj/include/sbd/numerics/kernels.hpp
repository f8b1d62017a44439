#pragma once

#include <concepts>
#include <cstddef>

// Dense matrix kernels. Every output row depends only on the matching input
// row(s) and is accumulated in a fixed order, so a row computed inside a tall
// batch is bit-identical to the same row computed alone. KV-cache exactness
// relies on this.
namespace sbd::kernels {

// C[m x n] (+)= A[m x k] * B[k x n]
template <std::floating_point T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// C[m x n] (+)= A[m x k] * B[n x k]^T
template <std::floating_point T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// C[k x n] (+)= A[m x k]^T * B[m x n]
template <std::floating_point T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);

template <std::floating_point T>
inline T dot(const T* __restrict__ a, const T* __restrict__ b, std::size_t n) {
  T acc{0};
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// y += alpha * x
template <std::floating_point T>
inline void axpy(T alpha, const T* __restrict__ x, T* __restrict__ y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace sbd::kernels
