#include "sbd/inference/session.hpp"

#include "sbd/errors.hpp"

namespace sbd {

template <std::floating_point T>
ModelSession<T>::ModelSession(const Model<T>& model, bool use_cache)
    : model_(model), use_cache_(use_cache), cache_(model.config()) {}

template <std::floating_point T>
Tensor<double> ModelSession<T>::forward(std::span<const std::int32_t> fresh, std::span<const std::int32_t> block) {
  const std::size_t rows = fresh.size() + block.size();
  if (rows == 0) throw ConfigError("forward with no tokens");
  if (committed_.size() + rows > model_.config().max_seq_len) {
    throw CapacityError("sequence of " + std::to_string(committed_.size() + rows) + " tokens exceeds max_seq_len " +
                        std::to_string(model_.config().max_seq_len));
  }
  ForwardRequest req;
  req.block_tokens.assign(block.begin(), block.end());
  Tensor<T> logits;
  if (use_cache_) {
    req.past_tokens.assign(fresh.begin(), fresh.end());
    logits = model_.forward_with_cache_update(req, cache_);
    committed_.insert(committed_.end(), fresh.begin(), fresh.end());
  } else {
    committed_.insert(committed_.end(), fresh.begin(), fresh.end());
    req.past_tokens = committed_;
    logits = model_.forward(req);
  }
  const std::size_t skip = logits.rows() - rows;
  Tensor<double> out({rows, logits.cols()});
  for (std::size_t r = 0; r < rows; ++r) {
    const auto src = logits.row(skip + r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = static_cast<double>(src[c]);
  }
  return out;
}

template class ModelSession<float>;
template class ModelSession<double>;

}  // namespace sbd
