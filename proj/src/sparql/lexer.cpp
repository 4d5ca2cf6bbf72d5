#include "lexer.hpp"

#include <cctype>
#include <optional>

#include "compass/sparql/query.hpp"

namespace compass::sparql::detail {

namespace {

bool is_name_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}

bool is_name_char(char c) {
  return is_name_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

bool is_prefix_char(char c) { return is_name_char(c) || c == '-' || c == '.'; }

bool is_local_char(char c) { return is_prefix_char(c) || c == ':' || c == '%'; }

void append_utf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> tokens;
    while (true) {
      skip_space_and_comments();
      if (pos_ >= text_.size()) {
        tokens.push_back({TokenKind::end, {}, pos_});
        return tokens;
      }
      tokens.push_back(next());
    }
  }

 private:
  [[noreturn]] void fail(const std::string& message, std::size_t at) const {
    throw SyntaxError(message, at, position_of(text_, at));
  }

  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }

  void skip_space_and_comments() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  Token next() {
    const std::size_t start = pos_;
    const char c = peek();

    if (c == '<') {
      if (auto iri = try_iri_ref()) return {TokenKind::iri_ref, *iri, start};
      if (peek(1) == '=') {
        pos_ += 2;
        return {TokenKind::punct, "<=", start};
      }
      ++pos_;
      return {TokenKind::punct, "<", start};
    }
    if ((c == '?' || c == '$') && is_name_char(peek(1))) {
      ++pos_;
      std::string name;
      while (is_name_char(peek())) name += text_[pos_++];
      return {TokenKind::var, name, start};
    }
    if (c == '_' && peek(1) == ':') {
      pos_ += 2;
      std::string label;
      while (is_prefix_char(peek())) label += text_[pos_++];
      while (!label.empty() && label.back() == '.') {
        label.pop_back();
        --pos_;
      }
      if (label.empty()) fail("empty blank node label", start);
      return {TokenKind::blank_label, label, start};
    }
    if (c == '"' || c == '\'') return {TokenKind::string, read_string(), start};
    if (c == '@') {
      ++pos_;
      std::string tag;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '-') {
        tag += text_[pos_++];
      }
      if (tag.empty()) fail("empty language tag", start);
      return {TokenKind::lang_tag, tag, start};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      return read_number();
    }
    if (is_name_start(c) || c == ':') return read_name_or_pname();

    static constexpr std::string_view kTwoChar[] = {"!=", ">=", "&&", "||", "^^"};
    for (auto sym : kTwoChar) {
      if (text_.substr(pos_, 2) == sym) {
        pos_ += 2;
        return {TokenKind::punct, std::string(sym), start};
      }
    }
    static constexpr std::string_view kOneChar = "{}()[].,;*=>!+-/^|?";
    if (kOneChar.find(c) != std::string_view::npos) {
      ++pos_;
      return {TokenKind::punct, std::string(1, c), start};
    }
    fail(std::string("unexpected character '") + c + "'", start);
  }

  std::optional<std::string> try_iri_ref() {
    std::size_t i = pos_ + 1;
    std::string value;
    while (i < text_.size()) {
      const char c = text_[i];
      if (c == '>') {
        pos_ = i + 1;
        return value;
      }
      if (std::isspace(static_cast<unsigned char>(c)) || c == '<' || c == '"' || c == '{' ||
          c == '}' || c == '|' || c == '^' || c == '`' || c == '\\') {
        return std::nullopt;
      }
      value += c;
      ++i;
    }
    return std::nullopt;
  }

  std::string read_string() {
    const std::size_t start = pos_;
    const char quote = peek();
    const bool long_form = peek(1) == quote && peek(2) == quote;
    pos_ += long_form ? 3 : 1;
    std::string out;
    while (true) {
      if (pos_ >= text_.size()) fail("unterminated string literal", start);
      const char c = text_[pos_];
      if (long_form) {
        if (c == quote && peek(1) == quote && peek(2) == quote) {
          pos_ += 3;
          return out;
        }
      } else if (c == quote) {
        ++pos_;
        return out;
      } else if (c == '\n' || c == '\r') {
        fail("line break in string literal", pos_);
      }
      if (c == '\\') {
        read_escape(out);
        continue;
      }
      out += c;
      ++pos_;
    }
  }

  void read_escape(std::string& out) {
    const std::size_t at = pos_;
    const char e = peek(1);
    pos_ += 2;
    switch (e) {
      case 't': out += '\t'; return;
      case 'n': out += '\n'; return;
      case 'r': out += '\r'; return;
      case 'b': out += '\b'; return;
      case 'f': out += '\f'; return;
      case '"': out += '"'; return;
      case '\'': out += '\''; return;
      case '\\': out += '\\'; return;
      case 'u':
      case 'U': {
        const std::size_t digits = e == 'u' ? 4 : 8;
        if (pos_ + digits > text_.size()) fail("truncated unicode escape", at);
        unsigned long cp = 0;
        for (std::size_t k = 0; k < digits; ++k) {
          const char h = text_[pos_ + k];
          if (!std::isxdigit(static_cast<unsigned char>(h))) fail("invalid unicode escape", at);
          cp = cp * 16 + static_cast<unsigned long>(
                             std::isdigit(static_cast<unsigned char>(h))
                                 ? h - '0'
                                 : std::tolower(static_cast<unsigned char>(h)) - 'a' + 10);
        }
        pos_ += digits;
        append_utf8(out, cp);
        return;
      }
      default: fail("invalid escape sequence", at);
    }
  }

  Token read_number() {
    const std::size_t start = pos_;
    std::string lexical;
    TokenKind kind = TokenKind::integer;
    while (std::isdigit(static_cast<unsigned char>(peek()))) lexical += text_[pos_++];
    if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      kind = TokenKind::decimal;
      lexical += text_[pos_++];
      while (std::isdigit(static_cast<unsigned char>(peek()))) lexical += text_[pos_++];
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t look = 1;
      if (peek(1) == '+' || peek(1) == '-') look = 2;
      if (std::isdigit(static_cast<unsigned char>(peek(look)))) {
        kind = TokenKind::double_;
        for (std::size_t k = 0; k < look; ++k) lexical += text_[pos_++];
        while (std::isdigit(static_cast<unsigned char>(peek()))) lexical += text_[pos_++];
      }
    }
    return {kind, lexical, start};
  }

  Token read_name_or_pname() {
    const std::size_t start = pos_;
    std::size_t i = pos_;
    while (i < text_.size() && is_prefix_char(text_[i])) ++i;
    if (i < text_.size() && text_[i] == ':') {
      std::string prefix(text_.substr(pos_, i - pos_));
      if (!prefix.empty() && prefix.back() == '.') fail("prefix name may not end with '.'", start);
      ++i;
      std::string local;
      while (i < text_.size()) {
        const char c = text_[i];
        if (c == '\\' && i + 1 < text_.size()) {
          local += text_[i + 1];
          i += 2;
        } else if (is_local_char(c)) {
          local += c;
          ++i;
        } else {
          break;
        }
      }
      while (!local.empty() && local.back() == '.') {
        local.pop_back();
        --i;
      }
      pos_ = i;
      return {TokenKind::pname, prefix + ":" + local, start};
    }
    std::string name;
    while (is_name_char(peek())) name += text_[pos_++];
    if (name.empty()) fail("unexpected character", start);
    return {TokenKind::name, name, start};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<Token> tokenize(std::string_view text) { return Lexer(text).run(); }

}  // namespace compass::sparql::detail
