#include "sbd/harness/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "sbd/errors.hpp"

namespace sbd {

std::string to_string(TokenizerKind k) { return k == TokenizerKind::ByteLevel ? "byte" : "char"; }

TokenizerKind parse_tokenizer_kind(const std::string& text) {
  if (text == "byte") return TokenizerKind::ByteLevel;
  if (text == "char") return TokenizerKind::CharLevel;
  throw ConfigError("unknown tokenizer '" + text + "' (expected byte or char)");
}

std::vector<std::string> utf8_code_points(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    if (c < 0x80) {
      len = 1;
    } else if ((c >> 5) == 0x6) {
      len = 2;
    } else if ((c >> 4) == 0xE) {
      len = 3;
    } else if ((c >> 3) == 0x1E) {
      len = 4;
    } else {
      throw DataError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > text.size()) throw DataError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t j = 1; j < len; ++j) {
      if ((static_cast<unsigned char>(text[i + j]) >> 6) != 0x2) {
        throw DataError("invalid UTF-8 continuation byte at offset " + std::to_string(i + j));
      }
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Tokenizer Tokenizer::byte_level() { return Tokenizer{}; }

Tokenizer Tokenizer::char_level(std::vector<std::string> symbols) {
  Tokenizer t;
  t.kind_ = TokenizerKind::CharLevel;
  t.symbols_ = std::move(symbols);
  for (std::size_t i = 0; i < t.symbols_.size(); ++i) {
    if (utf8_code_points(t.symbols_[i]).size() != 1) throw ConfigError("tokenizer symbol is not one code point");
    if (!t.index_.emplace(t.symbols_[i], static_cast<std::int32_t>(i)).second) {
      throw ConfigError("duplicate tokenizer symbol '" + t.symbols_[i] + "'");
    }
  }
  return t;
}

Tokenizer Tokenizer::char_level_from(std::string_view text) {
  const std::vector<std::string> cps = utf8_code_points(text);
  const std::set<std::string> uniq(cps.begin(), cps.end());
  return char_level({uniq.begin(), uniq.end()});
}

TokenSequence Tokenizer::encode(std::string_view text) const {
  TokenSequence out;
  if (kind_ == TokenizerKind::ByteLevel) {
    out.reserve(text.size());
    for (char c : text) out.push_back(static_cast<std::int32_t>(static_cast<unsigned char>(c)));
    return out;
  }
  for (const std::string& cp : utf8_code_points(text)) {
    const auto it = index_.find(cp);
    if (it == index_.end()) throw DataError("character '" + cp + "' is not in the vocabulary");
    out.push_back(it->second);
  }
  return out;
}

std::string Tokenizer::decode(std::span<const std::int32_t> tokens) const {
  std::string out;
  for (std::int32_t t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= size()) throw DataError("token " + std::to_string(t) + " has no symbol");
    if (kind_ == TokenizerKind::ByteLevel) {
      out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
    } else {
      out += symbols_[static_cast<std::size_t>(t)];
    }
  }
  return out;
}

std::int32_t Tokenizer::id_of(std::string_view symbol) const {
  const TokenSequence t = encode(symbol);
  if (t.size() != 1) throw DataError("'" + std::string(symbol) + "' is not a single token");
  return t[0];
}

nlohmann::json Tokenizer::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind_);
  if (kind_ == TokenizerKind::CharLevel) j["symbols"] = symbols_;
  return j;
}

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
  try {
    if (parse_tokenizer_kind(j.at("kind").get<std::string>()) == TokenizerKind::ByteLevel) return byte_level();
    return char_level(j.at("symbols").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("tokenizer: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

Corpus ingest(const std::filesystem::path& path, TokenizerKind kind) {
  const std::string text = read_file(path);
  Corpus c;
  c.tokenizer = kind == TokenizerKind::ByteLevel ? Tokenizer::byte_level() : Tokenizer::char_level_from(text);
  c.tokens = c.tokenizer.encode(text);
  c.provenance = {{"source", path.string()}, {"bytes", text.size()}, {"tokenizer", to_string(kind)}};
  return c;
}

}  // namespace sbd
