#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace compass::sparql::detail {

enum class TokenKind {
  iri_ref,      // <...>, value without brackets
  pname,        // prefix:local, value is the full text
  var,          // ?x or $x, value is the name
  blank_label,  // _:b, value is the label
  string,       // unescaped contents
  lang_tag,     // @en, value without '@'
  integer,
  decimal,
  double_,
  name,   // bare identifier: keywords, builtins, 'a', true/false
  punct,  // value holds the symbol
  end,
};

struct Token {
  TokenKind kind = TokenKind::end;
  std::string value;
  std::size_t offset = 0;
};

// Throws SyntaxError on malformed input.
std::vector<Token> tokenize(std::string_view text);

}  // namespace compass::sparql::detail
