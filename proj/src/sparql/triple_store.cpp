#include "compass/sparql/triple_store.hpp"

#include <fstream>
#include <sstream>

#include "compass/common/text.hpp"
#include "lexer.hpp"

namespace compass::sparql {

using detail::Token;
using detail::TokenKind;

void TripleStore::add(Triple t) {
  by_predicate_[t.predicate].push_back(triples_.size());
  triples_.push_back(std::move(t));
}

std::vector<std::size_t> TripleStore::match(const std::optional<RdfTerm>& s,
                                            const std::optional<RdfTerm>& p,
                                            const std::optional<RdfTerm>& o) const {
  std::vector<std::size_t> out;
  auto check = [&](std::size_t i) {
    const Triple& t = triples_[i];
    if (s && t.subject != *s) return;
    if (o && t.object != *o) return;
    out.push_back(i);
  };
  if (p) {
    auto it = by_predicate_.find(*p);
    if (it == by_predicate_.end()) return out;
    for (auto i : it->second) check(i);
  } else {
    for (std::size_t i = 0; i < triples_.size(); ++i) check(i);
  }
  return out;
}

namespace {

[[noreturn]] void fail_line(std::size_t line, std::size_t column, const std::string& msg) {
  throw ParseError("invalid N-Triples: " + msg, line, column);
}

RdfTerm read_term(const std::vector<Token>& toks, std::size_t& i, std::size_t line,
                  bool allow_literal) {
  const Token& t = toks[i];
  switch (t.kind) {
    case TokenKind::iri_ref: ++i; return RdfTerm::iri(t.value);
    case TokenKind::blank_label: ++i; return RdfTerm::blank(t.value);
    case TokenKind::string: {
      if (!allow_literal) break;
      ++i;
      if (toks[i].kind == TokenKind::lang_tag) {
        return RdfTerm::literal(t.value, {}, text::to_lower(toks[i++].value));
      }
      if (toks[i].kind == TokenKind::punct && toks[i].value == "^^") {
        ++i;
        if (toks[i].kind != TokenKind::iri_ref) fail_line(line, toks[i].offset + 1, "expected datatype IRI");
        std::string dt = toks[i++].value;
        if (dt == xsd::kString) dt.clear();
        return RdfTerm::literal(t.value, dt);
      }
      return RdfTerm::literal(t.value);
    }
    default: break;
  }
  fail_line(line, t.offset + 1, "unexpected token '" + t.value + "'");
}

}  // namespace

TripleStore load_ntriples(std::string_view document) {
  TripleStore store;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= document.size()) {
    auto end = document.find('\n', start);
    if (end == std::string_view::npos) end = document.size();
    std::string_view line = document.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (text::trim(line).empty()) {
      if (end == document.size()) break;
      continue;
    }
    std::vector<Token> toks;
    try {
      toks = detail::tokenize(line);
    } catch (const SyntaxError& e) {
      fail_line(line_no, e.offset() + 1, e.what());
    }
    if (toks.size() == 1) continue;  // comment-only line
    std::size_t i = 0;
    Triple t;
    t.subject = read_term(toks, i, line_no, false);
    if (t.subject.is_literal()) fail_line(line_no, 1, "literal subject");
    if (toks[i].kind != TokenKind::iri_ref) fail_line(line_no, toks[i].offset + 1, "predicate must be an IRI");
    t.predicate = read_term(toks, i, line_no, false);
    t.object = read_term(toks, i, line_no, true);
    if (!(toks[i].kind == TokenKind::punct && toks[i].value == ".")) {
      fail_line(line_no, toks[i].offset + 1, "expected '.'");
    }
    if (toks[i + 1].kind != TokenKind::end) fail_line(line_no, toks[i + 1].offset + 1, "trailing content");
    store.add(std::move(t));
    if (end == document.size()) break;
  }
  return store;
}

TripleStore load_ntriples_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open graph file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_ntriples(buf.str());
}

}  // namespace compass::sparql
