#include "sbd/training/trainer.hpp"

#include <chrono>
#include <numeric>

#include <fmt/format.h>

#include "sbd/errors.hpp"

namespace sbd {

namespace stream {
constexpr std::uint64_t kInit = 0;
constexpr std::uint64_t kData = 1;
constexpr std::uint64_t kBlock = 2;
constexpr std::uint64_t kMask = 3;
}  // namespace stream

void TrainConfig::validate() const {
  model.validate();
  if (k_min < 2 || k_min > k_max) {
    throw ConfigError("block size range [" + std::to_string(k_min) + ", " + std::to_string(k_max) + "] needs 2 <= k_min <= k_max");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (seq_len < 2) throw ConfigError("seq_len must be at least 2");
  if (loss_mode != LossMode::NTP && seq_len < k_max) throw ConfigError("seq_len must be at least k_max");
  if (seq_len > model.max_seq_len) throw ConfigError("seq_len exceeds the model's max_seq_len");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (min_lr_ratio < 0.0 || min_lr_ratio > 1.0) throw ConfigError("min_lr_ratio must lie in [0, 1]");
  if (precision != "f32" && precision != "f64") throw ConfigError("precision must be f32 or f64");
  if (weights.ntp < 0.0 || weights.matp < 0.0) throw ConfigError("loss weights must be non-negative");
}

std::size_t sample_block_size(Rng& rng, std::size_t k_min, std::size_t k_max) {
  if (k_min > k_max) throw ConfigError("empty block size range");
  return static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(k_min), static_cast<std::int64_t>(k_max)));
}

BatchStream::BatchStream(std::span<const std::int32_t> tokens, std::size_t seq_len, std::size_t batch_size,
                         std::size_t epochs, std::uint64_t seed)
    : tokens_(tokens),
      seq_len_(seq_len),
      batch_size_(batch_size),
      epochs_(epochs),
      n_chunks_(seq_len ? tokens.size() / seq_len : 0),
      rng_(seed) {}

std::vector<TokenSequence> BatchStream::next() {
  if (served_ >= capacity()) {
    throw DataError("corpus exhausted after " + std::to_string(served_) + " batches (" + std::to_string(n_chunks_) +
                    " chunks of " + std::to_string(seq_len_) + " tokens, " + std::to_string(epochs_) + " epoch(s))");
  }
  std::vector<TokenSequence> batch;
  batch.reserve(batch_size_);
  for (std::size_t b = 0; b < batch_size_; ++b) {
    if (cursor_ == order_.size()) {
      order_.resize(n_chunks_);
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      for (std::size_t i = n_chunks_; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<std::int64_t>(i) - 1));
        std::swap(order_[i - 1], order_[j]);
      }
      cursor_ = 0;
    }
    const auto start = static_cast<std::ptrdiff_t>(order_[cursor_++] * seq_len_);
    batch.emplace_back(tokens_.begin() + start, tokens_.begin() + start + static_cast<std::ptrdiff_t>(seq_len_));
  }
  ++served_;
  return batch;
}

template <std::floating_point T>
TrainResult<T> train(const TrainConfig& config, std::span<const std::int32_t> corpus, const ModelParams<T>* init,
                     const StepCallback& on_step) {
  config.validate();
  for (std::int32_t tok : corpus) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= config.model.vocab_size) {
      throw DataError("corpus token " + std::to_string(tok) + " outside the model vocabulary");
    }
  }
  TrainResult<T> result;
  result.params = init ? *init : ModelParams<T>::init(config.model, derive_seed(config.seed, stream::kInit));
  if (result.params.config != config.model) throw ConfigError("initial parameters do not match the model config");

  BatchStream data(corpus, config.seq_len, config.batch_size, config.epochs, derive_seed(config.seed, stream::kData));
  if (data.capacity() < config.steps) {
    throw DataError("corpus provides " + std::to_string(data.capacity()) + " batches but " +
                    std::to_string(config.steps) + " steps were requested");
  }
  Rng block_rng(derive_seed(config.seed, stream::kBlock));
  Rng mask_rng(derive_seed(config.seed, stream::kMask));
  const ScheduleConfig schedule{config.lr, config.warmup_steps, config.min_lr_ratio, config.steps};
  AdamW<T> opt(config.model, config.optim);
  ModelParams<T> grads = ModelParams<T>::zeros(config.model);
  BatchOptions bopt;
  bopt.mode = config.loss_mode;
  bopt.weights = config.weights;
  const std::int32_t mask_id = config.model.mask_token_id();

  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<TokenSequence> batch = data.next();
    std::size_t k = 1;
    std::vector<MaskedSequence> masks;
    if (config.loss_mode != LossMode::NTP) {
      k = sample_block_size(block_rng, config.k_min, config.k_max);
      for (const TokenSequence& x : batch) {
        const double eta = uniform01(mask_rng);
        masks.push_back(make_masked_sequence(x, eta, mask_id, mask_rng));
      }
    }
    for (auto& [name, g] : grads.named()) g->fill(T{0});
    const LossBreakdown loss = batch_loss<T>(result.params, batch, k, masks, bopt, &grads);
    const double norm = opt.step(result.params, grads, learning_rate(schedule, step));

    TrainStepRecord rec;
    rec.step = step;
    rec.k = k;
    rec.ntp_loss = loss.ntp;
    rec.matp_loss = loss.matp;
    rec.total_loss = loss.total;
    rec.grad_norm = norm;
    if (!config.deterministic) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    result.records.push_back(rec);
    if (on_step) on_step(rec);
  }
  return result;
}

void write_train_csv_header(std::ostream& out) {
  out << "step,k,ntp_loss,matp_loss,total_loss,grad_norm,wall_ms\n";
}

void write_train_csv_row(std::ostream& out, const TrainStepRecord& r) {
  out << fmt::format("{},{},{},{},{},{},{:.3f}\n", r.step, r.k, r.ntp_loss, r.matp_loss, r.total_loss, r.grad_norm,
                     r.wall_ms);
}

template TrainResult<float> train<float>(const TrainConfig&, std::span<const std::int32_t>, const ModelParams<float>*,
                                         const StepCallback&);
template TrainResult<double> train<double>(const TrainConfig&, std::span<const std::int32_t>,
                                           const ModelParams<double>*, const StepCallback&);

}  // namespace sbd
