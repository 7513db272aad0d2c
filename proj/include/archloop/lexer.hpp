#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace archloop {

enum class TokenKind : std::uint8_t {
  Keyword,
  Identifier,
  Number,
  String,
  Operator,
  Delimiter,
};

std::string_view to_string(TokenKind kind);

struct Token {
  TokenKind kind;
  std::string text;  // normalized lexeme, never empty
  std::uint32_t line = 1;
  // Unterminated string literal or an unlexable byte run. Shingling ignores
  // this; the simulated validator uses it to fail the parse stage.
  bool malformed = false;

  friend bool operator==(const Token& a, const Token& b) {
    return a.kind == b.kind && a.text == b.text;
  }
};

using TokenSequence = std::vector<Token>;

struct LexerOptions {
  std::size_t max_bytes = std::size_t{1} << 20;
};

/// Lexes Python-style candidate source into keyword / identifier / number /
/// string / operator / delimiter tokens. Comments, whitespace, indentation and
/// newlines produce no tokens. Never fails on malformed code: bytes that start
/// no token are grouped into runs and emitted as single delimiter tokens.
///
/// Throws OversizeInput when `source` exceeds `options.max_bytes`.
TokenSequence tokenize(std::string_view source, const LexerOptions& options = {});

/// Joins lexemes with single spaces.
std::string render(const TokenSequence& tokens);

bool is_keyword(std::string_view word);

}  // namespace archloop
