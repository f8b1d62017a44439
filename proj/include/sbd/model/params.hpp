#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sbd/numerics/tensor.hpp"

namespace sbd {

struct ModelConfig {
  std::size_t vocab_size = 512;
  std::size_t d_model = 128;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_ff = 512;
  std::size_t max_seq_len = 1024;
  double rope_base = 10000.0;
  // Diagnostic switch: with rope off the model sees no positions at all.
  bool use_rope = true;
  double norm_eps = 1e-5;

  // The mask token is one id past the base vocabulary. It has an embedding
  // row but no output column.
  std::int32_t mask_token_id() const noexcept { return static_cast<std::int32_t>(vocab_size); }
  std::size_t head_dim() const noexcept { return d_model / n_heads; }

  // Throws ConfigError on inconsistent sizes.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

template <std::floating_point T>
struct LayerParams {
  Tensor<T> attn_norm;  // [d]
  Tensor<T> wq, wk, wv, wo;  // [d x d]
  Tensor<T> mlp_norm;  // [d]
  Tensor<T> w1;  // [d x d_ff]
  Tensor<T> w2;  // [d_ff x d]
};

template <std::floating_point T>
struct ModelParams {
  ModelConfig config;
  Tensor<T> embed;  // [(V + 1) x d]
  std::vector<LayerParams<T>> layers;
  Tensor<T> final_norm;  // [d]
  Tensor<T> lm_head;  // [d x V]

  // Scaled-normal init; norm gains start at one.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  // Same shapes, all zeros. Used for gradient and optimizer-moment buffers.
  static ModelParams zeros(const ModelConfig& config);

  // Every tensor with its stable name, in checkpoint/optimizer order.
  std::vector<std::pair<std::string, Tensor<T>*>> named();
  std::vector<std::pair<std::string, const Tensor<T>*>> named() const;

  std::size_t parameter_count() const;

  template <std::floating_point U>
  ModelParams<U> cast() const {
    ModelParams<U> out = ModelParams<U>::zeros(config);
    auto dst = out.named();
    auto src = named();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>();
    return out;
  }
};

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;

}  // namespace sbd
