#include "sbd/model/transformer.hpp"

#include <string>

#include "sbd/errors.hpp"
#include "sbd/numerics/autograd.hpp"

namespace sbd {

namespace {

template <std::floating_point T>
Var leaf(Tape<T>& tape, const Tensor<T>& value, Tensor<T>* grad) {
  return grad ? tape.parameter(value, *grad) : tape.constant_ref(value);
}

template <std::floating_point T>
Tensor<T> leading_rows(const Tensor<T>& x, std::size_t rows) {
  const std::size_t d = x.cols();
  std::vector<T> data(x.data().begin(), x.data().begin() + static_cast<std::ptrdiff_t>(rows * d));
  return Tensor<T>(Shape{rows, d}, std::move(data));
}

}  // namespace

template <std::floating_point T>
Var transformer_graph(Tape<T>& tape, const ModelParams<T>& params, ModelParams<T>* grads,
                      std::span<const std::int32_t> tokens, std::span<const std::int32_t> positions,
                      const AttentionMaskSpec& mask, const KVCache<T>* cache, std::size_t keep_rows,
                      std::vector<Tensor<T>>* new_k, std::vector<Tensor<T>>* new_v) {
  const ModelConfig& cfg = params.config;
  const std::size_t n = tokens.size();
  const std::size_t cached = cache ? cache->length() : 0;
  if (positions.size() != n) throw ConfigError("one position id per token required");
  if (mask.n_queries != n || mask.n_keys != cached + n) {
    throw MaskError("mask is " + std::to_string(mask.n_queries) + "x" + std::to_string(mask.n_keys) +
                    ", forward needs " + std::to_string(n) + "x" + std::to_string(cached + n));
  }
  for (std::int32_t p : positions) {
    if (p < 0 || static_cast<std::size_t>(p) >= cfg.max_seq_len) {
      throw CapacityError("position " + std::to_string(p) + " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    }
  }
  for (std::int32_t tok : tokens) {
    if (tok < 0 || tok > cfg.mask_token_id()) throw ConfigError("token id " + std::to_string(tok) + " out of range");
  }
  if (new_k) new_k->clear();
  if (new_v) new_v->clear();

  const T eps = static_cast<T>(cfg.norm_eps);
  Var x = ag::embedding(tape, leaf(tape, params.embed, grads ? &grads->embed : nullptr), tokens);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const LayerParams<T>& lp = params.layers[l];
    LayerParams<T>* lg = grads ? &grads->layers[l] : nullptr;
    auto g = [&](Tensor<T> LayerParams<T>::*member) { return lg ? &(lg->*member) : nullptr; };

    Var h = ag::rms_norm(tape, x, leaf(tape, lp.attn_norm, g(&LayerParams<T>::attn_norm)), eps);
    Var q = ag::matmul(tape, h, leaf(tape, lp.wq, g(&LayerParams<T>::wq)));
    Var k = ag::matmul(tape, h, leaf(tape, lp.wk, g(&LayerParams<T>::wk)));
    Var v = ag::matmul(tape, h, leaf(tape, lp.wv, g(&LayerParams<T>::wv)));
    q = ag::rope(tape, q, positions, cfg.n_heads, cfg.rope_base, cfg.use_rope);
    k = ag::rope(tape, k, positions, cfg.n_heads, cfg.rope_base, cfg.use_rope);
    if (new_k) new_k->push_back(leading_rows(tape.value(k), keep_rows));
    if (new_v) new_v->push_back(leading_rows(tape.value(v), keep_rows));
    if (cache) {
      k = ag::concat_rows(tape, tape.constant_ref(cache->keys(l)), k);
      v = ag::concat_rows(tape, tape.constant_ref(cache->values(l)), v);
    }
    Var att = ag::attention(tape, q, k, v, mask.view(), cfg.n_heads);
    x = ag::add(tape, x, ag::matmul(tape, att, leaf(tape, lp.wo, g(&LayerParams<T>::wo))));

    Var m = ag::rms_norm(tape, x, leaf(tape, lp.mlp_norm, g(&LayerParams<T>::mlp_norm)), eps);
    m = ag::silu(tape, ag::matmul(tape, m, leaf(tape, lp.w1, g(&LayerParams<T>::w1))));
    x = ag::add(tape, x, ag::matmul(tape, m, leaf(tape, lp.w2, g(&LayerParams<T>::w2))));
  }
  x = ag::rms_norm(tape, x, leaf(tape, params.final_norm, grads ? &grads->final_norm : nullptr), eps);
  return ag::matmul(tape, x, leaf(tape, params.lm_head, grads ? &grads->lm_head : nullptr));
}

template <std::floating_point T>
Model<T>::Model(std::shared_ptr<const ModelParams<T>> params) : params_(std::move(params)) {
  if (!params_) throw ConfigError("model needs parameters");
  params_->config.validate();
}

template <std::floating_point T>
Model<T>::Model(ModelParams<T> params) : Model(std::make_shared<const ModelParams<T>>(std::move(params))) {}

template <std::floating_point T>
Tensor<T> Model<T>::forward(const ForwardRequest& req) const {
  return run(req, nullptr, nullptr);
}

template <std::floating_point T>
Tensor<T> Model<T>::forward(const ForwardRequest& req, const KVCache<T>& cache) const {
  return run(req, &cache, nullptr);
}

template <std::floating_point T>
Tensor<T> Model<T>::forward_with_cache_update(const ForwardRequest& req, KVCache<T>& cache) const {
  return run(req, &cache, &cache);
}

template <std::floating_point T>
Tensor<T> Model<T>::run(const ForwardRequest& req, const KVCache<T>* cache, KVCache<T>* update) const {
  const std::size_t cached = cache ? cache->length() : 0;
  if (cache && cache->n_layers() != config().n_layers) throw CacheError("cache was built for a different model");
  TokenSequence tokens = req.past_tokens;
  tokens.insert(tokens.end(), req.block_tokens.begin(), req.block_tokens.end());

  std::vector<std::int32_t> positions = req.position_ids;
  if (positions.empty()) {
    for (std::size_t i = 0; i < tokens.size(); ++i) positions.push_back(static_cast<std::int32_t>(cached + i));
  } else if (positions.size() != tokens.size()) {
    throw ConfigError("position_ids length differs from the token count");
  }
  // Cached keys cover positions [0, cached); fresh clean tokens must continue
  // right where the cache stops.
  if (cache) {
    for (std::size_t i = 0; i < req.past_tokens.size(); ++i) {
      if (positions[i] != static_cast<std::int32_t>(cached + i)) {
        throw CacheError("cache holds " + std::to_string(cached) + " tokens but the uncached past starts at position " +
                         std::to_string(positions[0]));
      }
    }
  }

  AttentionMaskSpec own;
  const AttentionMaskSpec* mask = req.mask_spec;
  if (!mask) {
    own = inference_mask_rows(cached, req.past_tokens.size(), req.block_tokens.size());
    mask = &own;
  }

  Tape<T> tape;
  tape.set_grad_enabled(false);
  std::vector<Tensor<T>> new_k, new_v;
  Var logits = transformer_graph<T>(tape, *params_, nullptr, tokens, positions, *mask, cache,
                                    req.past_tokens.size(), update ? &new_k : nullptr, update ? &new_v : nullptr);
  Tensor<T> out = tape.value(logits);
  if (update) update->append(new_k, new_v);
  return out;
}

template Var transformer_graph<float>(Tape<float>&, const ModelParams<float>&, ModelParams<float>*,
                                      std::span<const std::int32_t>, std::span<const std::int32_t>,
                                      const AttentionMaskSpec&, const KVCache<float>*, std::size_t,
                                      std::vector<Tensor<float>>*, std::vector<Tensor<float>>*);
template Var transformer_graph<double>(Tape<double>&, const ModelParams<double>&, ModelParams<double>*,
                                       std::span<const std::int32_t>, std::span<const std::int32_t>,
                                       const AttentionMaskSpec&, const KVCache<double>*, std::size_t,
                                       std::vector<Tensor<double>>*, std::vector<Tensor<double>>*);
template class Model<float>;
template class Model<double>;

}  // namespace sbd
