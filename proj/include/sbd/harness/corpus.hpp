#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sbd/masking/masking.hpp"

namespace sbd {

enum class TokenizerKind { ByteLevel, CharLevel };

std::string to_string(TokenizerKind k);
TokenizerKind parse_tokenizer_kind(const std::string& text);

// Byte level: one token per byte, 256 ids. Char level: one token per UTF-8
// code point, ids assigned in the order of `symbols`.
class Tokenizer {
 public:
  static Tokenizer byte_level();
  // Sorted distinct code points of `text`. Throws DataError on invalid UTF-8.
  static Tokenizer char_level_from(std::string_view text);
  static Tokenizer char_level(std::vector<std::string> symbols);

  TokenizerKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return kind_ == TokenizerKind::ByteLevel ? 256 : symbols_.size(); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  // Unknown characters or invalid UTF-8 throw DataError.
  TokenSequence encode(std::string_view text) const;
  std::string decode(std::span<const std::int32_t> tokens) const;
  std::int32_t id_of(std::string_view symbol) const;

  nlohmann::json to_json() const;
  static Tokenizer from_json(const nlohmann::json& j);

  bool operator==(const Tokenizer& o) const { return kind_ == o.kind_ && symbols_ == o.symbols_; }

 private:
  TokenizerKind kind_ = TokenizerKind::ByteLevel;
  std::vector<std::string> symbols_;
  std::map<std::string, std::int32_t, std::less<>> index_;
};

// Splits UTF-8 into code point substrings; DataError on malformed input.
std::vector<std::string> utf8_code_points(std::string_view text);

struct Corpus {
  TokenSequence tokens;
  Tokenizer tokenizer;
  nlohmann::json provenance;
};

// Reads a file and tokenizes it. Char level builds the vocabulary from the
// file itself. Unreadable files throw IoError.
Corpus ingest(const std::filesystem::path& path, TokenizerKind kind);

std::string read_file(const std::filesystem::path& path);

}  // namespace sbd
