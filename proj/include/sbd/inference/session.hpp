#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>

#include "sbd/model/kv_cache.hpp"
#include "sbd/model/transformer.hpp"
#include "sbd/numerics/tensor.hpp"

namespace sbd {

// What the decoder needs from a model: one forward over (committed prefix ;
// block), where `fresh` clean tokens join the prefix first. Returns logits for
// the fresh rows followed by the block rows.
class DecodeSession {
 public:
  virtual ~DecodeSession() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::int32_t mask_token_id() const = 0;
  virtual std::size_t max_seq_len() const = 0;
  virtual std::size_t committed_length() const = 0;

  virtual Tensor<double> forward(std::span<const std::int32_t> fresh, std::span<const std::int32_t> block) = 0;
};

template <std::floating_point T>
class ModelSession final : public DecodeSession {
 public:
  // `model` must outlive the session.
  ModelSession(const Model<T>& model, bool use_cache);

  std::size_t vocab_size() const override { return model_.config().vocab_size; }
  std::int32_t mask_token_id() const override { return model_.config().mask_token_id(); }
  std::size_t max_seq_len() const override { return model_.config().max_seq_len; }
  std::size_t committed_length() const override { return committed_.size(); }

  Tensor<double> forward(std::span<const std::int32_t> fresh, std::span<const std::int32_t> block) override;

  const KVCache<T>& cache() const noexcept { return cache_; }

 private:
  const Model<T>& model_;
  bool use_cache_;
  KVCache<T> cache_;
  TokenSequence committed_;
};

extern template class ModelSession<float>;
extern template class ModelSession<double>;

}  // namespace sbd
