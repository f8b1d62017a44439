#include "sbd/model/params.hpp"

#include <cmath>

#include "sbd/errors.hpp"
#include "sbd/numerics/random.hpp"

namespace sbd {

void ModelConfig::validate() const {
  if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 || max_seq_len == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (head_dim() % 2 != 0) throw ConfigError("head dimension must be even for rotary embeddings");
  if (!(rope_base > 1.0)) throw ConfigError("rope_base must exceed 1");
  if (!(norm_eps > 0.0)) throw ConfigError("norm_eps must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},   {"n_layers", c.n_layers},
                     {"n_heads", c.n_heads},       {"d_ff", c.d_ff},         {"max_seq_len", c.max_seq_len},
                     {"rope_base", c.rope_base},   {"use_rope", c.use_rope}, {"norm_eps", c.norm_eps}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  const ModelConfig d;
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.d_model = j.value("d_model", d.d_model);
  c.n_layers = j.value("n_layers", d.n_layers);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.d_ff = j.value("d_ff", d.d_ff);
  c.max_seq_len = j.value("max_seq_len", d.max_seq_len);
  c.rope_base = j.value("rope_base", d.rope_base);
  c.use_rope = j.value("use_rope", d.use_rope);
  c.norm_eps = j.value("norm_eps", d.norm_eps);
}

namespace {

template <std::floating_point T>
Tensor<T> normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (T& x : t.data()) x = static_cast<T>(stddev * normal01(rng));
  return t;
}

template <std::floating_point T>
Tensor<T> ones(std::size_t n) {
  Tensor<T> t(Shape{n});
  t.fill(T{1});
  return t;
}

}  // namespace

template <std::floating_point T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t d = config.d_model, ff = config.d_ff, V = config.vocab_size;
  const double in_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double in_ff = 1.0 / std::sqrt(static_cast<double>(ff));
  // Residual-branch outputs are shrunk with depth so the stream stays O(1).
  const double depth = 1.0 / std::sqrt(2.0 * static_cast<double>(config.n_layers));

  ModelParams p;
  p.config = config;
  p.embed = normal_tensor<T>({V + 1, d}, 1.0, rng);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    LayerParams<T> lp;
    lp.attn_norm = ones<T>(d);
    lp.wq = normal_tensor<T>({d, d}, in_d, rng);
    lp.wk = normal_tensor<T>({d, d}, in_d, rng);
    lp.wv = normal_tensor<T>({d, d}, in_d, rng);
    lp.wo = normal_tensor<T>({d, d}, in_d * depth, rng);
    lp.mlp_norm = ones<T>(d);
    lp.w1 = normal_tensor<T>({d, ff}, in_d, rng);
    lp.w2 = normal_tensor<T>({ff, d}, in_ff * depth, rng);
    p.layers.push_back(std::move(lp));
  }
  p.final_norm = ones<T>(d);
  p.lm_head = normal_tensor<T>({d, V}, in_d, rng);
  return p;
}

template <std::floating_point T>
ModelParams<T> ModelParams<T>::zeros(const ModelConfig& config) {
  const std::size_t d = config.d_model, ff = config.d_ff, V = config.vocab_size;
  ModelParams p;
  p.config = config;
  p.embed = Tensor<T>({V + 1, d});
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    LayerParams<T> lp;
    lp.attn_norm = Tensor<T>({d});
    lp.wq = Tensor<T>({d, d});
    lp.wk = Tensor<T>({d, d});
    lp.wv = Tensor<T>({d, d});
    lp.wo = Tensor<T>({d, d});
    lp.mlp_norm = Tensor<T>({d});
    lp.w1 = Tensor<T>({d, ff});
    lp.w2 = Tensor<T>({ff, d});
    p.layers.push_back(std::move(lp));
  }
  p.final_norm = Tensor<T>({d});
  p.lm_head = Tensor<T>({d, V});
  return p;
}

template <std::floating_point T>
std::vector<std::pair<std::string, Tensor<T>*>> ModelParams<T>::named() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  out.emplace_back("embed", &embed);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string pre = "layers." + std::to_string(l) + ".";
    LayerParams<T>& lp = layers[l];
    out.emplace_back(pre + "attn_norm", &lp.attn_norm);
    out.emplace_back(pre + "wq", &lp.wq);
    out.emplace_back(pre + "wk", &lp.wk);
    out.emplace_back(pre + "wv", &lp.wv);
    out.emplace_back(pre + "wo", &lp.wo);
    out.emplace_back(pre + "mlp_norm", &lp.mlp_norm);
    out.emplace_back(pre + "w1", &lp.w1);
    out.emplace_back(pre + "w2", &lp.w2);
  }
  out.emplace_back("final_norm", &final_norm);
  out.emplace_back("lm_head", &lm_head);
  return out;
}

template <std::floating_point T>
std::vector<std::pair<std::string, const Tensor<T>*>> ModelParams<T>::named() const {
  auto mut = const_cast<ModelParams*>(this)->named();
  std::vector<std::pair<std::string, const Tensor<T>*>> out;
  out.reserve(mut.size());
  for (auto& [name, ptr] : mut) out.emplace_back(std::move(name), ptr);
  return out;
}

template <std::floating_point T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

template struct ModelParams<float>;
template struct ModelParams<double>;

}  // namespace sbd
