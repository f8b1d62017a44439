#include "sbd/numerics/kernels.hpp"

#include <algorithm>
#include <vector>

namespace sbd::kernels {

// Rows are processed four at a time so each row of B is loaded once per
// group. Every C element still accumulates c += a * b in ascending p, exactly
// as in the one-row tail, which keeps rows independent of their neighbours.
template <std::floating_point T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T{0});
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    T* __restrict__ c0 = c + i * n;
    T* __restrict__ c1 = c0 + n;
    T* __restrict__ c2 = c1 + n;
    T* __restrict__ c3 = c2 + n;
    const T* a0 = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T v0 = a0[p], v1 = a0[k + p], v2 = a0[2 * k + p], v3 = a0[3 * k + p];
      const T* __restrict__ brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const T bv = brow[j];
        c0[j] += v0 * bv;
        c1[j] += v1 * bv;
        c2[j] += v2 * bv;
        c3[j] += v3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    const T* __restrict__ arow = a + i * k;
    T* __restrict__ crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* __restrict__ brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <std::floating_point T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  // Transpose B once so the inner loop streams contiguous memory.
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(a, bt.data(), c, m, k, n, accumulate);
}

template <std::floating_point T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + k * n, T{0});
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + i * k;
    const T* __restrict__ b0 = b + i * n;
    const T* __restrict__ b1 = b0 + n;
    const T* __restrict__ b2 = b1 + n;
    const T* __restrict__ b3 = b2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const T v0 = a0[p], v1 = a0[k + p], v2 = a0[2 * k + p], v3 = a0[3 * k + p];
      T* __restrict__ crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] = (((crow[j] + v0 * b0[j]) + v1 * b1[j]) + v2 * b2[j]) + v3 * b3[j];
    }
  }
  for (; i < m; ++i) {
    const T* __restrict__ arow = a + i * k;
    const T* __restrict__ brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      T* __restrict__ crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

#define SBD_INSTANTIATE(T)                                                                          \
  template void gemm_nn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);  \
  template void gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);  \
  template void gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);  \

SBD_INSTANTIATE(float)
SBD_INSTANTIATE(double)

#undef SBD_INSTANTIATE

}  // namespace sbd::kernels
