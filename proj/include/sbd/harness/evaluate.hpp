#pragma once

#include <concepts>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "sbd/harness/tasks.hpp"
#include "sbd/inference/generate.hpp"
#include "sbd/model/transformer.hpp"

namespace sbd {

struct EvalRow {
  std::string variant;
  // gamma for EB variants, f for Factor, "-" for NTP.
  std::string threshold;
  std::size_t instances = 0;
  double accuracy = 0.0;
  // Means over instances of the per-generation ratios.
  double nfe_speedup = 0.0;
  double nfe_speedup_to_stop = 0.0;
  std::size_t tokens_generated = 0;
  std::size_t forwards = 0;
  double wall_ms = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  // Parallel to rows; one trace per instance in instance order.
  std::vector<std::vector<GenerationTrace>> traces;
};

struct EvalOptions {
  std::size_t workers = 1;
  // Zeroes wall_ms.
  bool deterministic = false;
};

std::string threshold_label(const SamplerConfig& cfg);

// Runs every sampler over every instance (instance i seeded with
// derive_seed(cfg.seed, i)), scoring exact match. The answer terminator is
// always a stop token. Throws ConfigError when the tokenizer and model
// vocabularies differ or two samplers share a (variant, threshold) key.
template <std::floating_point T>
EvalReport evaluate(const Model<T>& model, const Tokenizer& tokenizer, const std::vector<TaskInstance>& instances,
                    const std::vector<SamplerConfig>& samplers, const EvalOptions& opt = {});

void write_eval_csv(std::ostream& out, const EvalReport& report);

// Accuracy against mean NFE speedup, one labelled point per row.
std::string eval_svg(const EvalReport& report, const std::string& title = "accuracy vs NFE speedup");

}  // namespace sbd
