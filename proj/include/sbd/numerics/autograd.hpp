#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>

#include "sbd/numerics/tape.hpp"

// Differentiable ops recorded on a Tape. Matrices are row-major [rows x cols];
// scalars are rank-1 tensors of size 1.
namespace sbd::ag {

// Row-major boolean visibility grid: allowed[q * n_k + k] != 0.
struct MaskView {
  std::size_t n_q = 0;
  std::size_t n_k = 0;
  const std::uint8_t* allowed = nullptr;
};

template <std::floating_point T>
Var matmul(Tape<T>& t, Var a, Var b);

template <std::floating_point T>
Var add(Tape<T>& t, Var a, Var b);

template <std::floating_point T>
Var scale(Tape<T>& t, Var a, T s);

template <std::floating_point T>
Var sum(Tape<T>& t, Var a);

template <std::floating_point T>
Var embedding(Tape<T>& t, Var table, std::span<const std::int32_t> ids);

// y = x * gain / sqrt(mean(x^2) + eps), per row.
template <std::floating_point T>
Var rms_norm(Tape<T>& t, Var x, Var gain, T eps);

template <std::floating_point T>
Var silu(Tape<T>& t, Var x);

// Rotary embedding of each head slice of x, pairing dims (2i, 2i+1) and using
// the explicit position of every row. `enabled == false` is the identity.
template <std::floating_point T>
Var rope(Tape<T>& t, Var x, std::span<const std::int32_t> positions, std::size_t n_heads, double base,
         bool enabled);

template <std::floating_point T>
Var concat_rows(Tape<T>& t, Var a, Var b);

// Multi-head scaled dot-product attention with an explicit visibility grid.
// A query row with no visible key produces zeros.
template <std::floating_point T>
Var attention(Tape<T>& t, Var q, Var k, Var v, MaskView mask, std::size_t n_heads);

// scale * sum over rows with mask set of -log softmax(logits[row])[target].
template <std::floating_point T>
Var cross_entropy(Tape<T>& t, Var logits, std::span<const std::int32_t> targets,
                  std::span<const std::uint8_t> mask, T scale);

}  // namespace sbd::ag
