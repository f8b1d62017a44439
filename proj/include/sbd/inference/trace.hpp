#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <vector>

namespace sbd {

struct BlockTrace {
  // Offset of the block within the generated tokens.
  std::size_t t = 0;
  std::size_t k = 0;
  std::size_t forwards = 0;
  std::vector<std::size_t> revealed_per_forward;
  // Tokens fed to each forward (fresh clean tokens plus the block).
  std::vector<std::size_t> forwarded_tokens;
  // Entropy (nats) of each revealed position at the time it was revealed,
  // in reveal order.
  std::vector<double> entropies;
  // For each block position, the 0-based forward that revealed it.
  std::vector<std::size_t> reveal_forward;
};

struct GenerationTrace {
  std::vector<BlockTrace> blocks;
  // Up to the end of the last decoded block.
  std::size_t tokens_generated = 0;
  std::size_t total_forwards = 0;
  // Offset of the first stop token in the generated tokens, if any.
  std::optional<std::size_t> stop_offset;
  // Up to and including the stop token; equal to the totals without one.
  std::size_t tokens_to_stop = 0;
  std::size_t forwards_to_stop = 0;

  double nfe_speedup() const;
  double nfe_speedup_to_stop() const;
  // Recomputes the totals and stop figures from the blocks.
  void finalize();
};

// One JSON object per block, tagged with the generation index `gen`.
void write_trace_jsonl(std::ostream& out, const GenerationTrace& trace, std::size_t gen);

// Inverse of write_trace_jsonl over a stream of many generations, ordered by
// first appearance of each `gen`. Throws IoError on malformed lines.
std::vector<GenerationTrace> read_trace_jsonl(std::istream& in);

}  // namespace sbd
