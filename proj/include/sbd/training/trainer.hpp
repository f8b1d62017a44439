#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sbd/model/params.hpp"
#include "sbd/numerics/random.hpp"
#include "sbd/training/loss.hpp"
#include "sbd/training/optimizer.hpp"

namespace sbd {

struct TrainConfig {
  ModelConfig model;
  std::size_t k_min = 2;
  std::size_t k_max = 16;
  std::size_t steps = 1000;
  std::size_t batch_size = 8;
  std::size_t seq_len = 64;
  // Passes over the corpus chunks allowed before DataError.
  std::size_t epochs = 1;
  double lr = 3e-4;
  std::size_t warmup_steps = 200;
  double min_lr_ratio = 0.1;
  AdamWConfig optim;
  LossWeights weights;
  LossMode loss_mode = LossMode::SBD;
  std::uint64_t seed = 0;
  // "f32" for runs, "f64" for tests and byte-exact replay.
  std::string precision = "f32";
  // Zeroes wall_ms so logs are reproducible byte for byte.
  bool deterministic = false;

  void validate() const;
};

struct TrainStepRecord {
  std::size_t step = 0;
  // Block size used this step; 1 in NTP mode, where no block is formed.
  std::size_t k = 0;
  double ntp_loss = 0.0;
  double matp_loss = 0.0;
  double total_loss = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;

  bool operator==(const TrainStepRecord&) const = default;
};

template <std::floating_point T>
struct TrainResult {
  ModelParams<T> params;
  std::vector<TrainStepRecord> records;
};

// Uniform over the integers [k_min, k_max].
std::size_t sample_block_size(Rng& rng, std::size_t k_min, std::size_t k_max);

// Fixed-length contiguous chunks, shuffled per epoch by a seeded permutation.
class BatchStream {
 public:
  BatchStream(std::span<const std::int32_t> tokens, std::size_t seq_len, std::size_t batch_size, std::size_t epochs,
              std::uint64_t seed);
  std::size_t capacity() const noexcept { return n_chunks_ * epochs_ / batch_size_; }
  std::vector<TokenSequence> next();

 private:
  std::span<const std::int32_t> tokens_;
  std::size_t seq_len_, batch_size_, epochs_, n_chunks_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t served_ = 0;
};

using StepCallback = std::function<void(const TrainStepRecord&)>;

// Runs `config.steps` steps. Randomness comes from four independent streams
// derived from config.seed (init, data order, block size, masking), so the
// data order is the same in every loss mode.
template <std::floating_point T>
TrainResult<T> train(const TrainConfig& config, std::span<const std::int32_t> corpus,
                     const ModelParams<T>* init = nullptr, const StepCallback& on_step = {});

void write_train_csv_header(std::ostream& out);
void write_train_csv_row(std::ostream& out, const TrainStepRecord& r);

}  // namespace sbd
