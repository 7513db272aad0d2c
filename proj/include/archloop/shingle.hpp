#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "archloop/lexer.hpp"

namespace archloop {

inline constexpr int kDefaultShingleWidth = 10;

// Separates serialized tokens inside a window. The lexer escapes control
// bytes, so it cannot occur in a lexeme.
inline constexpr char kShingleSeparator = '\x1f';

struct ShingleSet {
  std::vector<std::uint64_t> shingles;  // sorted, unique
  int k = kDefaultShingleWidth;
  std::size_t source_token_count = 0;

  std::size_t size() const { return shingles.size(); }
  bool empty() const { return shingles.empty(); }

  friend bool operator==(const ShingleSet&, const ShingleSet&) = default;
};

/// Hashes every window of `k` consecutive tokens (serialized as kind:text,
/// joined by kShingleSeparator) with a fixed 64-bit hash. Duplicate windows
/// collapse. Throws std::invalid_argument when k < 1.
ShingleSet shingle(const TokenSequence& tokens, int k = kDefaultShingleWidth);

/// tokenize() followed by shingle().
ShingleSet shingle_source(std::string_view source, int k = kDefaultShingleWidth,
                          const LexerOptions& options = {});

}  // namespace archloop
