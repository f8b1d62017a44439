#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

// Training visibility grid rebuilt from raw physical indices, without the
// layout type: rows [2bk, 2bk+k) hold clean block b, rows [2bk+k, 2bk+2k) its
// masked copy, and anything past 2*nb*k is trailing clean text.
inline std::vector<std::uint8_t> reference_training_mask(std::size_t L, std::size_t k) {
  const std::size_t nb = L / k;
  const std::size_t n = 2 * nb * k + L % k;
  struct Cell {
    bool masked;
    std::size_t block;
    std::size_t token;
  };
  auto decode = [&](std::size_t r) {
    if (r >= 2 * nb * k) return Cell{false, nb, nb * k + (r - 2 * nb * k)};
    const std::size_t b = r / (2 * k);
    const std::size_t w = r % (2 * k);
    return Cell{w >= k, b, b * k + w % k};
  };
  std::vector<std::uint8_t> grid(n * n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const Cell q = decode(r);
    for (std::size_t c = 0; c < n; ++c) {
      const Cell key = decode(c);
      bool see;
      if (!q.masked) {
        see = !key.masked && key.token <= q.token;
      } else if (key.masked) {
        see = key.block == q.block;
      } else {
        see = key.block < q.block;
      }
      grid[r * n + c] = see ? 1 : 0;
    }
  }
  return grid;
}
