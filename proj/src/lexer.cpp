#include "archloop/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>

#include "archloop/error.hpp"

namespace archloop {

namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",       "assert", "async",
    "await", "break",  "class",   "continue", "def",      "del",    "elif",
    "else",  "except", "finally", "for",      "from",     "global", "if",
    "import", "in",    "is",      "lambda",   "nonlocal", "not",    "or",
    "pass",  "raise",  "return",  "try",      "while",    "with",   "yield",
};

struct Punct {
  std::string_view text;
  TokenKind kind;
};

// Ordered longest first so the first hit is the longest match.
constexpr std::array<Punct, 47> kPunct = {{
    {"**=", TokenKind::Operator}, {"//=", TokenKind::Operator}, {">>=", TokenKind::Operator},
    {"<<=", TokenKind::Operator}, {"...", TokenKind::Delimiter},
    {":=", TokenKind::Operator},  {"**", TokenKind::Operator},  {"//", TokenKind::Operator},
    {"<<", TokenKind::Operator},  {">>", TokenKind::Operator},  {"<=", TokenKind::Operator},
    {">=", TokenKind::Operator},  {"==", TokenKind::Operator},  {"!=", TokenKind::Operator},
    {"+=", TokenKind::Operator},  {"-=", TokenKind::Operator},  {"*=", TokenKind::Operator},
    {"/=", TokenKind::Operator},  {"%=", TokenKind::Operator},  {"&=", TokenKind::Operator},
    {"|=", TokenKind::Operator},  {"^=", TokenKind::Operator},  {"@=", TokenKind::Operator},
    {"->", TokenKind::Delimiter},
    {"+", TokenKind::Operator},   {"-", TokenKind::Operator},   {"*", TokenKind::Operator},
    {"/", TokenKind::Operator},   {"%", TokenKind::Operator},   {"@", TokenKind::Operator},
    {"&", TokenKind::Operator},   {"|", TokenKind::Operator},   {"^", TokenKind::Operator},
    {"~", TokenKind::Operator},   {"<", TokenKind::Operator},   {">", TokenKind::Operator},
    {"=", TokenKind::Operator},
    {"(", TokenKind::Delimiter},  {")", TokenKind::Delimiter},  {"[", TokenKind::Delimiter},
    {"]", TokenKind::Delimiter},  {"{", TokenKind::Delimiter},  {"}", TokenKind::Delimiter},
    {",", TokenKind::Delimiter},  {":", TokenKind::Delimiter},  {";", TokenKind::Delimiter},
    {".", TokenKind::Delimiter},
}};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_start(char c) {
  auto u = static_cast<unsigned char>(c);
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || u >= 0x80;
}
bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

bool is_string_prefix(std::string_view word) {
  if (word.empty() || word.size() > 2) return false;
  std::string lower;
  for (char c : word) lower.push_back(static_cast<char>(c | 0x20));
  return lower == "r" || lower == "u" || lower == "b" || lower == "f" || lower == "br" ||
         lower == "rb" || lower == "fr" || lower == "rf";
}

// Escapes control bytes (other than tab/newline/CR) so the shingle separator
// can never appear inside a lexeme.
std::string normalize_bytes(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    auto u = static_cast<unsigned char>(c);
    if ((u < 0x20 && c != '\t' && c != '\n' && c != '\r') || u == 0x7f) {
      char buf[5];
      std::snprintf(buf, sizeof buf, "\\x%02x", u);
      out += buf;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  TokenSequence run() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (is_space(c)) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else if (is_continuation()) {
        pos_ += (src_[pos_ + 1] == '\r') ? 3 : 2;
        ++line_;
      } else if (is_ident_start(c)) {
        lex_word();
      } else if (is_digit(c) || (c == '.' && is_digit(peek(1)))) {
        lex_number();
      } else if (c == '\'' || c == '"') {
        lex_string(pos_, pos_);
      } else if (!lex_punct()) {
        lex_unlexable();
      }
    }
    return std::move(out_);
  }

 private:
  char peek(std::size_t ahead) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  bool is_continuation() const {
    if (src_[pos_] != '\\') return false;
    char n = peek(1);
    return n == '\n' || (n == '\r' && peek(2) == '\n');
  }

  void emit(TokenKind kind, std::string text, std::uint32_t line, bool malformed = false) {
    out_.push_back(Token{kind, std::move(text), line, malformed});
  }

  void lex_word() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
    std::string_view word = src_.substr(start, pos_ - start);
    if (pos_ < src_.size() && (src_[pos_] == '\'' || src_[pos_] == '"') && is_string_prefix(word)) {
      lex_string(start, pos_);
      return;
    }
    emit(is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier, std::string(word), line_);
  }

  void lex_number() {
    std::size_t start = pos_;
    auto digits = [&](auto pred) {
      while (pos_ < src_.size() && (pred(src_[pos_]) || src_[pos_] == '_')) ++pos_;
    };
    char c1 = peek(1) | 0x20;
    if (src_[pos_] == '0' && (c1 == 'x' || c1 == 'o' || c1 == 'b')) {
      pos_ += 2;
      digits([](char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; });
    } else {
      digits(is_digit);
      if (pos_ < src_.size() && src_[pos_] == '.') {
        ++pos_;
        digits(is_digit);
      }
      if (pos_ < src_.size() && (src_[pos_] | 0x20) == 'e') {
        std::size_t save = pos_;
        ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
        if (pos_ < src_.size() && is_digit(src_[pos_])) {
          digits(is_digit);
        } else {
          pos_ = save;
        }
      }
      if (pos_ < src_.size() && (src_[pos_] | 0x20) == 'j') ++pos_;
    }
    emit(TokenKind::Number, std::string(src_.substr(start, pos_ - start)), line_);
  }

  // `start` includes any prefix; `quote_at` points at the opening quote.
  void lex_string(std::size_t start, std::size_t quote_at) {
    const std::uint32_t line = line_;
    const char q = src_[quote_at];
    const bool triple = quote_at + 2 < src_.size() && src_[quote_at + 1] == q && src_[quote_at + 2] == q;
    pos_ = quote_at + (triple ? 3 : 1);
    bool closed = false;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\\' && pos_ + 1 < src_.size()) {
        if (src_[pos_ + 1] == '\n') ++line_;
        pos_ += 2;
        continue;
      }
      if (c == '\n') {
        if (!triple) break;
        ++line_;
      }
      if (c == q) {
        if (!triple) {
          ++pos_;
          closed = true;
          break;
        }
        if (pos_ + 2 < src_.size() && src_[pos_ + 1] == q && src_[pos_ + 2] == q) {
          pos_ += 3;
          closed = true;
          break;
        }
      }
      ++pos_;
    }
    emit(TokenKind::String, normalize_bytes(src_.substr(start, pos_ - start)), line, !closed);
  }

  bool match_punct(std::size_t at, Punct* hit) const {
    std::string_view rest = src_.substr(at);
    for (const auto& p : kPunct) {
      if (rest.starts_with(p.text)) {
        if (hit) *hit = p;
        return true;
      }
    }
    return false;
  }

  bool lex_punct() {
    Punct hit{};
    if (!match_punct(pos_, &hit)) return false;
    pos_ += hit.text.size();
    emit(hit.kind, std::string(hit.text), line_);
    return true;
  }

  bool starts_token(std::size_t at) const {
    char c = src_[at];
    if (is_space(c) || c == '#' || c == '\'' || c == '"' || is_ident_start(c) || is_digit(c)) return true;
    if (c == '\\') {
      char n = at + 1 < src_.size() ? src_[at + 1] : '\0';
      return n == '\n' || (n == '\r' && at + 2 < src_.size() && src_[at + 2] == '\n');
    }
    return match_punct(at, nullptr);
  }

  void lex_unlexable() {
    std::size_t start = pos_;
    ++pos_;
    while (pos_ < src_.size() && !starts_token(pos_)) ++pos_;
    emit(TokenKind::Delimiter, normalize_bytes(src_.substr(start, pos_ - start)), line_, true);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::uint32_t line_ = 1;
  TokenSequence out_;
};

}  // namespace

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Number: return "number";
    case TokenKind::String: return "string";
    case TokenKind::Operator: return "operator";
    case TokenKind::Delimiter: return "delimiter";
  }
  return "unknown";
}

bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

TokenSequence tokenize(std::string_view source, const LexerOptions& options) {
  if (source.size() > options.max_bytes) {
    throw OversizeInput("candidate source of " + std::to_string(source.size()) +
                        " bytes exceeds the " + std::to_string(options.max_bytes) + " byte limit");
  }
  return Lexer(source).run();
}

std::string render(const TokenSequence& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t.text;
  }
  return out;
}

}  // namespace archloop
