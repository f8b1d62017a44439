#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sbd/masking/masking.hpp"
#include "sbd/model/kv_cache.hpp"
#include "sbd/model/params.hpp"
#include "sbd/numerics/tape.hpp"

namespace sbd {

// One forward over (past ; block). With a cache, past_tokens is only the
// uncached suffix and positions continue from the cache length.
struct ForwardRequest {
  TokenSequence past_tokens;
  TokenSequence block_tokens;
  // Empty means contiguous positions starting at the cache length (or 0).
  std::vector<std::int32_t> position_ids;
  // Null means the standard inference layout for this request.
  const AttentionMaskSpec* mask_spec = nullptr;
};

// Raw graph builder shared by training and inference. `grads` may be null,
// in which case parameters enter the tape as constants. When `cache` is given
// its keys precede the supplied tokens in every layer, and the post-rotary
// K/V of the first `keep_rows` supplied tokens are returned through
// `new_k`/`new_v` (one tensor per layer).
template <std::floating_point T>
Var transformer_graph(Tape<T>& tape, const ModelParams<T>& params, ModelParams<T>* grads,
                      std::span<const std::int32_t> tokens, std::span<const std::int32_t> positions,
                      const AttentionMaskSpec& mask, const KVCache<T>* cache = nullptr, std::size_t keep_rows = 0,
                      std::vector<Tensor<T>>* new_k = nullptr, std::vector<Tensor<T>>* new_v = nullptr);

// Inference wrapper around immutable, shareable parameters.
template <std::floating_point T>
class Model {
 public:
  explicit Model(std::shared_ptr<const ModelParams<T>> params);
  explicit Model(ModelParams<T> params);

  const ModelConfig& config() const noexcept { return params_->config; }
  const ModelParams<T>& params() const noexcept { return *params_; }

  // Logits [rows x V] for every supplied token (past rows first, then block).
  Tensor<T> forward(const ForwardRequest& req) const;
  Tensor<T> forward(const ForwardRequest& req, const KVCache<T>& cache) const;

  // As forward(req, cache), then appends the K/V of the past tokens (never the
  // block tokens) to the cache.
  Tensor<T> forward_with_cache_update(const ForwardRequest& req, KVCache<T>& cache) const;

 private:
  Tensor<T> run(const ForwardRequest& req, const KVCache<T>* cache, KVCache<T>* update) const;

  std::shared_ptr<const ModelParams<T>> params_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace sbd
