#include "sbd/model/kv_cache.hpp"

#include "sbd/errors.hpp"

namespace sbd {

template <std::floating_point T>
KVCache<T>::KVCache(const ModelConfig& config) : d_model_(config.d_model) {
  keys_.assign(config.n_layers, Tensor<T>(Shape{0, d_model_}));
  values_.assign(config.n_layers, Tensor<T>(Shape{0, d_model_}));
}

namespace {

template <std::floating_point T>
Tensor<T> grow(const Tensor<T>& base, const Tensor<T>& extra, std::size_t d) {
  std::vector<T> data(base.data().begin(), base.data().end());
  data.insert(data.end(), extra.data().begin(), extra.data().end());
  const std::size_t rows = data.size() / d;
  return Tensor<T>(Shape{rows, d}, std::move(data));
}

}  // namespace

template <std::floating_point T>
void KVCache<T>::append(const std::vector<Tensor<T>>& k_rows, const std::vector<Tensor<T>>& v_rows) {
  if (k_rows.size() != keys_.size() || v_rows.size() != values_.size()) {
    throw CacheError("cache append needs one key and one value tensor per layer");
  }
  std::size_t rows = 0;
  for (std::size_t l = 0; l < keys_.size(); ++l) {
    const std::size_t kr = k_rows[l].size() / d_model_;
    if (k_rows[l].size() != kr * d_model_ || v_rows[l].size() != kr * d_model_ || (l > 0 && kr != rows)) {
      throw CacheError("cache append with inconsistent row counts across layers");
    }
    rows = kr;
  }
  for (std::size_t l = 0; l < keys_.size(); ++l) {
    keys_[l] = grow(keys_[l], k_rows[l], d_model_);
    values_[l] = grow(values_[l], v_rows[l], d_model_);
  }
  length_ += rows;
}

template <std::floating_point T>
void KVCache<T>::clear() {
  for (auto& k : keys_) k = Tensor<T>(Shape{0, d_model_});
  for (auto& v : values_) v = Tensor<T>(Shape{0, d_model_});
  length_ = 0;
}

template class KVCache<float>;
template class KVCache<double>;

}  // namespace sbd
