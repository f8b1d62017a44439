#include "sbd/inference/select.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "sbd/errors.hpp"

namespace sbd {

std::string to_string(SamplerVariant v) {
  switch (v) {
    case SamplerVariant::NTP: return "ntp";
    case SamplerVariant::EBEntropy: return "eb_entropy";
    case SamplerVariant::EBConfidence: return "eb_confidence";
    case SamplerVariant::Factor: return "factor";
  }
  return "?";
}

SamplerVariant parse_variant(const std::string& text) {
  std::string s = text;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "ntp") return SamplerVariant::NTP;
  if (s == "eb" || s == "eb_entropy" || s == "ebentropy") return SamplerVariant::EBEntropy;
  if (s == "eb_confidence" || s == "ebconfidence") return SamplerVariant::EBConfidence;
  if (s == "factor") return SamplerVariant::Factor;
  throw ConfigError("unknown sampler variant '" + text + "'");
}

void SamplerConfig::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  if (k == 0) throw ConfigError("block size k must be at least 1");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be finite and >= 0");
  if (std::isnan(f)) throw ConfigError("factor threshold f is NaN");
}

std::vector<std::size_t> eb_select_entropy(std::span<const double> entropies, double gamma) {
  std::vector<std::size_t> order(entropies.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return entropies[a] < entropies[b]; });
  std::size_t s = order.empty() ? 0 : 1;
  double partial = 0.0;
  // Admitting the (s+1)-th token needs the first s entropies to sum to <= gamma.
  while (s < order.size()) {
    partial += entropies[order[s - 1]];
    if (partial > gamma) break;
    ++s;
  }
  order.resize(s);
  return order;
}

std::vector<std::size_t> confidence_order(std::span<const double> confidences) {
  std::vector<std::size_t> order(confidences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return confidences[a] > confidences[b]; });
  return order;
}

std::vector<std::size_t> eb_select_confidence(std::span<const double> confidences, std::span<const double> entropies,
                                              double gamma) {
  if (confidences.size() != entropies.size()) throw ConfigError("confidence and entropy lists differ in length");
  std::vector<std::size_t> order = confidence_order(confidences);
  std::size_t s = order.empty() ? 0 : 1;
  double sum = order.empty() ? 0.0 : entropies[order[0]];
  double mx = sum;
  // sum - max never decreases as s grows, so the admissible s form a prefix.
  while (s < order.size()) {
    const double h = entropies[order[s]];
    if (sum + h - std::max(mx, h) > gamma) break;
    sum += h;
    mx = std::max(mx, h);
    ++s;
  }
  order.resize(s);
  return order;
}

std::vector<std::size_t> factor_select(std::span<const double> confidences, double f, FactorRule rule) {
  std::vector<std::size_t> order = confidence_order(confidences);
  std::size_t n = 0;
  for (std::size_t i = 1; i <= order.size(); ++i) {
    const double c = confidences[order[i - 1]];
    const double lhs = static_cast<double>(i + 1) * (rule == FactorRule::Literal ? c : 1.0 - c);
    if (lhs < f) n = i;
  }
  order.resize(std::max<std::size_t>(n, order.empty() ? 0 : 1));
  return order;
}

std::int32_t token_sample(std::span<const double> probs, double temperature, Rng& rng) {
  if (probs.empty()) throw NumericError("token_sample: empty distribution");
  if (temperature == 0.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
      if (probs[i] > probs[best]) best = i;
    }
    return static_cast<std::int32_t>(best);
  }
  // Tempered weights in log space, shifted by the max for stability.
  std::vector<double> w(probs.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) mx = std::max(mx, std::log(probs[i]) / temperature);
  }
  double z = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) w[i] = std::exp(std::log(probs[i]) / temperature - mx);
    z += w[i];
  }
  const double u = uniform01(rng) * z;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    acc += w[i];
    last = i;
    if (u < acc) return static_cast<std::int32_t>(i);
  }
  return static_cast<std::int32_t>(last);
}

}  // namespace sbd
