#include "archloop/shingle.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "archloop/hash.hpp"

namespace archloop {

namespace {

char kind_code(TokenKind kind) {
  switch (kind) {
    case TokenKind::Keyword: return 'K';
    case TokenKind::Identifier: return 'I';
    case TokenKind::Number: return 'N';
    case TokenKind::String: return 'S';
    case TokenKind::Operator: return 'O';
    case TokenKind::Delimiter: return 'D';
  }
  return '?';
}

}  // namespace

ShingleSet shingle(const TokenSequence& tokens, int k) {
  if (k < 1) throw std::invalid_argument("shingle width k must be >= 1");

  ShingleSet out;
  out.k = k;
  out.source_token_count = tokens.size();
  const auto width = static_cast<std::size_t>(k);
  if (tokens.size() < width) return out;

  out.shingles.reserve(tokens.size() - width + 1);
  std::string window;
  for (std::size_t start = 0; start + width <= tokens.size(); ++start) {
    window.clear();
    for (std::size_t i = start; i < start + width; ++i) {
      if (i != start) window.push_back(kShingleSeparator);
      window.push_back(kind_code(tokens[i].kind));
      window.push_back(':');
      window += tokens[i].text;
    }
    out.shingles.push_back(mix64(fnv1a64(window)));
  }
  std::sort(out.shingles.begin(), out.shingles.end());
  out.shingles.erase(std::unique(out.shingles.begin(), out.shingles.end()), out.shingles.end());
  return out;
}

ShingleSet shingle_source(std::string_view source, int k, const LexerOptions& options) {
  return shingle(tokenize(source, options), k);
}

}  // namespace archloop
