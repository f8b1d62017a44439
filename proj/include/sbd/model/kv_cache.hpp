#pragma once

#include <concepts>
#include <cstddef>
#include <vector>

#include "sbd/model/params.hpp"
#include "sbd/numerics/tensor.hpp"

namespace sbd {

// Post-rotary keys and values of committed clean tokens, one [len x d] pair
// per layer. Append-only; block tokens are never stored here.
template <std::floating_point T>
class KVCache {
 public:
  KVCache() = default;
  explicit KVCache(const ModelConfig& config);

  std::size_t length() const noexcept { return length_; }
  std::size_t n_layers() const noexcept { return keys_.size(); }
  const Tensor<T>& keys(std::size_t layer) const { return keys_.at(layer); }
  const Tensor<T>& values(std::size_t layer) const { return values_.at(layer); }

  // Appends `rows` rows to every layer at once; the outer vectors are indexed
  // by layer and must all carry the same row count.
  void append(const std::vector<Tensor<T>>& k_rows, const std::vector<Tensor<T>>& v_rows);
  void clear();

 private:
  std::size_t d_model_ = 0;
  std::size_t length_ = 0;
  std::vector<Tensor<T>> keys_;
  std::vector<Tensor<T>> values_;
};

extern template class KVCache<float>;
extern template class KVCache<double>;

}  // namespace sbd
