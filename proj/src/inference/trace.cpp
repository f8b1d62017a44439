#include "sbd/inference/trace.hpp"

#include <algorithm>
#include <map>
#include <string>

#include <json.hpp>

#include "sbd/errors.hpp"

namespace sbd {

double GenerationTrace::nfe_speedup() const {
  return total_forwards ? static_cast<double>(tokens_generated) / static_cast<double>(total_forwards) : 0.0;
}

double GenerationTrace::nfe_speedup_to_stop() const {
  return forwards_to_stop ? static_cast<double>(tokens_to_stop) / static_cast<double>(forwards_to_stop) : 0.0;
}

void GenerationTrace::finalize() {
  tokens_generated = 0;
  total_forwards = 0;
  for (const BlockTrace& b : blocks) {
    tokens_generated += b.k;
    total_forwards += b.forwards;
  }
  tokens_to_stop = tokens_generated;
  forwards_to_stop = total_forwards;
  if (!stop_offset) return;
  tokens_to_stop = *stop_offset + 1;
  forwards_to_stop = 0;
  for (const BlockTrace& b : blocks) {
    if (*stop_offset >= b.t + b.k) {
      forwards_to_stop += b.forwards;
      continue;
    }
    // Only the forwards needed to reveal everything up to the stop token.
    std::size_t need = 0;
    for (std::size_t j = 0; j + b.t <= *stop_offset && j < b.reveal_forward.size(); ++j) {
      need = std::max(need, b.reveal_forward[j] + 1);
    }
    forwards_to_stop += need;
    break;
  }
}

void write_trace_jsonl(std::ostream& out, const GenerationTrace& trace, std::size_t gen) {
  for (const BlockTrace& b : trace.blocks) {
    nlohmann::json j;
    j["gen"] = gen;
    j["t"] = b.t;
    j["k"] = b.k;
    j["forwards"] = b.forwards;
    j["revealed_per_forward"] = b.revealed_per_forward;
    j["forwarded_tokens"] = b.forwarded_tokens;
    j["entropies"] = b.entropies;
    j["reveal_forward"] = b.reveal_forward;
    if (trace.stop_offset && *trace.stop_offset >= b.t && *trace.stop_offset < b.t + b.k) {
      j["stop"] = *trace.stop_offset;
    }
    out << j.dump() << '\n';
  }
}

std::vector<GenerationTrace> read_trace_jsonl(std::istream& in) {
  std::vector<GenerationTrace> traces;
  std::map<std::size_t, std::size_t> slot;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      const auto gen = j.at("gen").get<std::size_t>();
      auto [it, inserted] = slot.try_emplace(gen, traces.size());
      if (inserted) traces.emplace_back();
      GenerationTrace& tr = traces[it->second];
      BlockTrace b;
      b.t = j.at("t").get<std::size_t>();
      b.k = j.at("k").get<std::size_t>();
      b.forwards = j.at("forwards").get<std::size_t>();
      b.revealed_per_forward = j.at("revealed_per_forward").get<std::vector<std::size_t>>();
      b.entropies = j.at("entropies").get<std::vector<double>>();
      if (j.contains("forwarded_tokens")) b.forwarded_tokens = j["forwarded_tokens"].get<std::vector<std::size_t>>();
      if (j.contains("reveal_forward")) b.reveal_forward = j["reveal_forward"].get<std::vector<std::size_t>>();
      if (j.contains("stop")) tr.stop_offset = j["stop"].get<std::size_t>();
      tr.blocks.push_back(std::move(b));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (GenerationTrace& tr : traces) tr.finalize();
  return traces;
}

}  // namespace sbd
