#pragma once

#include <cstdint>
#include <span>

#include "sbd/inference/select.hpp"
#include "sbd/inference/session.hpp"
#include "sbd/inference/trace.hpp"
#include "sbd/masking/masking.hpp"

namespace sbd {

struct GenerationResult {
  // Truncated just after the first stop token when one was produced.
  TokenSequence tokens;
  GenerationTrace trace;
};

// Decodes up to cfg.max_tokens tokens after `prompt` on a fresh session.
// Block t forwards the previous block's tokens (which join the prefix) with
// the masks of block t in its first pass, and the block alone afterwards.
// A stop token ends generation once its block is fully decoded.
GenerationResult generate(DecodeSession& session, std::span<const std::int32_t> prompt, const SamplerConfig& cfg);

}  // namespace sbd
