#include "sbd/inference/generate.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "sbd/errors.hpp"
#include "sbd/numerics/ops.hpp"

namespace sbd {

namespace {

struct RowStats {
  std::vector<double> probs;
  double entropy = 0.0;
  double confidence = 0.0;
};

RowStats row_stats(std::span<const double> logits) {
  RowStats s;
  s.probs.assign(logits.begin(), logits.end());
  softmax_inplace<double>(s.probs);
  s.entropy = entropy<double>(std::span<const double>(s.probs));
  s.confidence = *std::max_element(s.probs.begin(), s.probs.end());
  return s;
}

bool is_stop(const SamplerConfig& cfg, std::int32_t tok) {
  return std::find(cfg.stop_token_ids.begin(), cfg.stop_token_ids.end(), tok) != cfg.stop_token_ids.end();
}

std::vector<std::size_t> select(const SamplerConfig& cfg, const std::vector<RowStats>& stats) {
  std::vector<double> ent, conf;
  for (const RowStats& s : stats) {
    ent.push_back(s.entropy);
    conf.push_back(s.confidence);
  }
  switch (cfg.variant) {
    case SamplerVariant::EBEntropy: return eb_select_entropy(ent, cfg.gamma);
    case SamplerVariant::EBConfidence: return eb_select_confidence(conf, ent, cfg.gamma);
    case SamplerVariant::Factor: return factor_select(conf, cfg.f, cfg.factor_rule);
    case SamplerVariant::NTP: break;
  }
  throw std::logic_error("select: NTP has no reveal rule");
}

// Blocks of k, emulated one token per forward.
void generate_ntp(DecodeSession& session, std::span<const std::int32_t> prompt, const SamplerConfig& cfg, Rng& rng,
                  GenerationResult& res) {
  if (prompt.size() > 1) session.forward(prompt.first(prompt.size() - 1), {});
  std::int32_t next = prompt.back();
  for (std::size_t t = 0; t < cfg.max_tokens; t += cfg.k) {
    BlockTrace b;
    b.t = t;
    b.k = std::min(cfg.k, cfg.max_tokens - t);
    for (std::size_t j = 0; j < b.k; ++j) {
      const std::int32_t in[1] = {next};
      const Tensor<double> logits = session.forward(in, {});
      const RowStats s = row_stats(logits.row(0));
      next = token_sample(s.probs, cfg.temperature, rng);
      res.tokens.push_back(next);
      b.forwards += 1;
      b.revealed_per_forward.push_back(1);
      b.forwarded_tokens.push_back(1);
      b.entropies.push_back(s.entropy);
      b.reveal_forward.push_back(j);
    }
    res.trace.blocks.push_back(std::move(b));
    if (std::any_of(res.tokens.begin() + static_cast<std::ptrdiff_t>(t), res.tokens.end(),
                    [&](std::int32_t tok) { return is_stop(cfg, tok); })) {
      break;
    }
  }
}

void generate_blocks(DecodeSession& session, std::span<const std::int32_t> prompt, const SamplerConfig& cfg,
                     Rng& rng, GenerationResult& res) {
  const std::int32_t mask_id = session.mask_token_id();
  session.forward(prompt, {});
  TokenSequence pending;  // previous block, not yet part of the session prefix
  for (std::size_t t = 0; t < cfg.max_tokens; t += cfg.k) {
    BlockTrace b;
    b.t = t;
    b.k = std::min(cfg.k, cfg.max_tokens - t);
    TokenSequence block(b.k, mask_id);
    b.reveal_forward.assign(b.k, 0);
    std::size_t remaining = b.k;
    while (remaining > 0) {
      const Tensor<double> logits = session.forward(pending, block);
      b.forwarded_tokens.push_back(pending.size() + block.size());
      pending.clear();
      const std::size_t base = logits.rows() - b.k;
      std::vector<std::size_t> masked;
      std::vector<RowStats> stats;
      for (std::size_t j = 0; j < b.k; ++j) {
        if (block[j] != mask_id) continue;
        masked.push_back(j);
        stats.push_back(row_stats(logits.row(base + j)));
      }
      const std::vector<std::size_t> chosen = select(cfg, stats);
      if (chosen.empty()) throw std::logic_error("reveal rule selected no token");
      for (std::size_t i : chosen) {
        const std::size_t pos = masked[i];
        block[pos] = token_sample(stats[i].probs, cfg.temperature, rng);
        b.entropies.push_back(stats[i].entropy);
        b.reveal_forward[pos] = b.forwards;
      }
      b.revealed_per_forward.push_back(chosen.size());
      b.forwards += 1;
      remaining -= chosen.size();
    }
    res.tokens.insert(res.tokens.end(), block.begin(), block.end());
    res.trace.blocks.push_back(std::move(b));
    pending = std::move(block);
    if (std::any_of(pending.begin(), pending.end(), [&](std::int32_t tok) { return is_stop(cfg, tok); })) break;
  }
}

}  // namespace

GenerationResult generate(DecodeSession& session, std::span<const std::int32_t> prompt, const SamplerConfig& cfg) {
  cfg.validate();
  if (prompt.empty()) throw ConfigError("generation needs a non-empty prompt");
  if (session.committed_length() != 0) throw ConfigError("generation needs a fresh session");
  const auto vocab = static_cast<std::int32_t>(session.vocab_size());
  for (std::int32_t tok : prompt) {
    if (tok < 0 || tok >= vocab) throw ConfigError("prompt token " + std::to_string(tok) + " outside the vocabulary");
  }
  if (prompt.size() + cfg.max_tokens > session.max_seq_len()) {
    throw CapacityError("prompt of " + std::to_string(prompt.size()) + " plus " + std::to_string(cfg.max_tokens) +
                        " new tokens exceeds max_seq_len " + std::to_string(session.max_seq_len()));
  }
  Rng rng(cfg.seed);
  GenerationResult res;
  if (cfg.variant == SamplerVariant::NTP) {
    generate_ntp(session, prompt, cfg, rng, res);
  } else {
    generate_blocks(session, prompt, cfg, rng, res);
  }
  for (std::size_t i = 0; i < res.tokens.size(); ++i) {
    if (is_stop(cfg, res.tokens[i])) {
      res.trace.stop_offset = i;
      res.tokens.resize(i + 1);
      break;
    }
  }
  res.trace.finalize();
  return res;
}

}  // namespace sbd
