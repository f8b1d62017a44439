#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sbd/numerics/random.hpp"

namespace sbd {

enum class SamplerVariant { NTP, EBEntropy, EBConfidence, Factor };

// Direction of the Factor inequality. Literal: (n+1) * c_n < f.
// Complement: (n+1) * (1 - c_n) < f, i.e. the rule phrased on error mass.
enum class FactorRule { Literal, Complement };

std::string to_string(SamplerVariant v);
// "ntp", "eb", "eb_entropy", "eb_confidence", "factor" (case-insensitive).
SamplerVariant parse_variant(const std::string& text);

struct SamplerConfig {
  SamplerVariant variant = SamplerVariant::EBEntropy;
  double gamma = 0.1;
  double f = 2.5;
  FactorRule factor_rule = FactorRule::Literal;
  std::size_t k = 8;
  // 0 means argmax.
  double temperature = 0.0;
  std::size_t max_tokens = 64;
  std::vector<std::int32_t> stop_token_ids;
  std::uint64_t seed = 0;
  // Off: every forward recomputes the full prefix. Only useful as a check.
  bool use_cache = true;

  void validate() const;
};

// All selectors take per-masked-position statistics (index i refers to the
// i-th masked position) and return the chosen indices in reveal order.
// Ties are always broken by the lower index.

// Ascending entropy; the largest s >= 1 with H_1 + ... + H_{s-1} <= gamma.
std::vector<std::size_t> eb_select_entropy(std::span<const double> entropies, double gamma);

// Descending confidence; the largest s >= 1 with sum_{j<=s} H_j - max_{j<=s} H_j <= gamma.
std::vector<std::size_t> eb_select_confidence(std::span<const double> confidences, std::span<const double> entropies,
                                              double gamma);

// Descending confidence; the first n tokens, n the largest index satisfying the
// configured inequality, clamped to at least one.
std::vector<std::size_t> factor_select(std::span<const double> confidences, double f,
                                       FactorRule rule = FactorRule::Literal);

// Masked positions ordered by confidence, highest first. Shared by the
// confidence-based selectors, so their reveal sets are prefixes of it.
std::vector<std::size_t> confidence_order(std::span<const double> confidences);

// Temperature 0: argmax, lowest index on ties. Otherwise draws from p^(1/T)
// renormalised, by inverse CDF on one uniform01 draw.
std::int32_t token_sample(std::span<const double> probs, double temperature, Rng& rng);

}  // namespace sbd
