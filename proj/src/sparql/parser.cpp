#include <algorithm>
#include <functional>
#include <set>

#include "compass/common/text.hpp"
#include "compass/schema/graph_schema.hpp"
#include "compass/sparql/query.hpp"
#include "lexer.hpp"

namespace compass::sparql {

using detail::Token;
using detail::TokenKind;

namespace {

// Valid SPARQL that the local analyzer does not model.
struct NotAnalyzable {
  std::string reason;
};

const std::set<std::string>& builtin_names() {
  static const std::set<std::string> names = {
      "STR",       "LANG",     "LANGMATCHES", "DATATYPE", "BOUND",     "IRI",
      "URI",       "BNODE",    "RAND",        "ABS",      "CEIL",      "FLOOR",
      "ROUND",     "CONCAT",   "SUBSTR",      "STRLEN",   "REPLACE",   "UCASE",
      "LCASE",     "ENCODE_FOR_URI", "CONTAINS", "STRSTARTS", "STRENDS", "STRBEFORE",
      "STRAFTER",  "YEAR",     "MONTH",       "DAY",      "HOURS",     "MINUTES",
      "SECONDS",   "TIMEZONE", "TZ",          "NOW",      "UUID",      "STRUUID",
      "MD5",       "SHA1",     "SHA256",      "SHA384",   "SHA512",    "COALESCE",
      "IF",        "STRLANG",  "STRDT",       "SAMETERM", "ISIRI",     "ISURI",
      "ISBLANK",   "ISLITERAL", "ISNUMERIC",  "REGEX"};
  return names;
}

const std::set<std::string>& aggregate_names() {
  static const std::set<std::string> names = {"COUNT", "SUM", "MIN", "MAX", "AVG"};
  return names;
}

const std::set<std::string>& update_keywords() {
  static const std::set<std::string> names = {"INSERT", "DELETE", "LOAD", "CLEAR", "CREATE",
                                              "DROP",   "COPY",   "MOVE", "ADD",   "WITH"};
  return names;
}

ExprPtr make_expr(Expression e) { return std::make_shared<const Expression>(std::move(e)); }

class Parser {
 public:
  Parser(std::string_view text, std::vector<Token> tokens)
      : text_(text), tokens_(std::move(tokens)) {}

  QueryModel parse() {
    QueryModel model;
    parse_prologue(model);
    const Token& t = peek();
    const std::string kw = upper(t);
    if (t.kind == TokenKind::name && kw == "SELECT") {
      model.form = QueryForm::select;
      parse_select(model);
    } else if (t.kind == TokenKind::name && kw == "ASK") {
      model.form = QueryForm::ask;
      advance();
      parse_dataset_clauses();
      if (is_keyword("WHERE")) advance();
      model.where = parse_group();
      parse_solution_modifiers(model);
    } else if (t.kind == TokenKind::name && (kw == "CONSTRUCT" || kw == "DESCRIBE")) {
      throw UnsupportedFormError(kw);
    } else if (t.kind == TokenKind::name && update_keywords().count(kw)) {
      throw UnsupportedFormError("update (" + kw + ")");
    } else {
      fail("expected SELECT or ASK");
    }
    if (is_keyword("VALUES")) throw NotAnalyzable{"trailing VALUES clause"};
    if (peek().kind != TokenKind::end) fail("unexpected trailing input");
    return model;
  }

  const std::vector<std::pair<std::string, std::string>>& prefixes() const { return prefixes_; }

 private:
  // ---- token helpers --------------------------------------------------
  const Token& peek(std::size_t ahead = 0) const {
    const std::size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[i];
  }
  const Token& advance() {
    const Token& t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return t;
  }
  static std::string upper(const Token& t) { return text::to_upper(t.value); }
  bool is_keyword(std::string_view kw, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokenKind::name && upper(t) == kw;
  }
  bool is_punct(std::string_view p, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokenKind::punct && t.value == p;
  }
  [[noreturn]] void fail(const std::string& message) const { fail_at(message, peek().offset); }
  [[noreturn]] void fail_at(const std::string& message, std::size_t offset) const {
    std::string found = peek().kind == TokenKind::end ? "end of query" : "'" + peek().value + "'";
    throw SyntaxError(message + ", found " + found, offset, position_of(text_, offset));
  }
  void expect_punct(std::string_view p) {
    if (!is_punct(p)) fail("expected '" + std::string(p) + "'");
    advance();
  }
  void expect_keyword(std::string_view kw) {
    if (!is_keyword(kw)) fail("expected " + std::string(kw));
    advance();
  }

  // ---- prologue -------------------------------------------------------
  void parse_prologue(QueryModel& model) {
    while (true) {
      if (is_keyword("PREFIX")) {
        advance();
        const Token& name = peek();
        if (name.kind != TokenKind::pname || name.value.back() != ':') {
          fail("expected prefix name ending in ':'");
        }
        std::string label = name.value.substr(0, name.value.size() - 1);
        advance();
        if (peek().kind != TokenKind::iri_ref) fail("expected IRI reference");
        std::string ns = advance().value;
        prefix_map_[label] = ns;
        prefixes_.emplace_back(label, ns);
      } else if (is_keyword("BASE")) {
        throw NotAnalyzable{"BASE declaration"};
      } else {
        break;
      }
    }
    model.prefixes = prefixes_;
  }

  void parse_dataset_clauses() {
    if (is_keyword("FROM")) throw NotAnalyzable{"dataset clause (FROM)"};
  }

  // ---- SELECT ---------------------------------------------------------
  void parse_select(QueryModel& model) {
    advance();  // SELECT
    if (is_keyword("DISTINCT")) {
      model.distinct = true;
      advance();
    } else if (is_keyword("REDUCED")) {
      model.reduced = true;
      advance();
    }
    if (is_punct("*")) {
      model.select_all = true;
      advance();
    } else {
      while (true) {
        if (peek().kind == TokenKind::var) {
          model.projections.push_back({advance().value, nullptr});
        } else if (is_punct("(")) {
          advance();
          ExprPtr e = parse_expression();
          expect_keyword("AS");
          if (peek().kind != TokenKind::var) fail("expected variable after AS");
          model.projections.push_back({advance().value, e});
          expect_punct(")");
        } else {
          break;
        }
      }
      if (model.projections.empty()) fail("expected projection variables or '*'");
    }
    parse_dataset_clauses();
    if (is_keyword("WHERE")) advance();
    model.where = parse_group();
    parse_solution_modifiers(model);
  }

  void parse_solution_modifiers(QueryModel& model) {
    if (is_keyword("GROUP")) {
      advance();
      expect_keyword("BY");
      bool any = false;
      while (true) {
        if (peek().kind == TokenKind::var) {
          model.group_by.push_back({var_expr(advance().value), {}});
        } else if (is_punct("(")) {
          advance();
          GroupCondition gc{parse_expression(), {}};
          if (is_keyword("AS")) {
            advance();
            if (peek().kind != TokenKind::var) fail("expected variable after AS");
            gc.alias = advance().value;
          }
          expect_punct(")");
          model.group_by.push_back(std::move(gc));
        } else if (starts_call()) {
          model.group_by.push_back({parse_primary(), {}});
        } else {
          break;
        }
        any = true;
      }
      if (!any) fail("expected GROUP BY condition");
    }
    if (is_keyword("HAVING")) throw NotAnalyzable{"HAVING clause"};
    if (is_keyword("ORDER")) {
      advance();
      expect_keyword("BY");
      bool any = false;
      while (true) {
        if (is_keyword("ASC") || is_keyword("DESC")) {
          const bool desc = is_keyword("DESC");
          advance();
          expect_punct("(");
          ExprPtr e = parse_expression();
          expect_punct(")");
          model.order_by.push_back({e, desc});
        } else if (peek().kind == TokenKind::var) {
          model.order_by.push_back({var_expr(advance().value), false});
        } else if (is_punct("(")) {
          advance();
          ExprPtr e = parse_expression();
          expect_punct(")");
          model.order_by.push_back({e, false});
        } else if (starts_call()) {
          model.order_by.push_back({parse_primary(), false});
        } else {
          break;
        }
        any = true;
      }
      if (!any) fail("expected ORDER BY condition");
    }
    for (int i = 0; i < 2; ++i) {
      if (is_keyword("LIMIT") && !model.limit) {
        advance();
        model.limit = parse_count("LIMIT");
      } else if (is_keyword("OFFSET") && !model.offset) {
        advance();
        model.offset = parse_count("OFFSET");
      }
    }
  }

  long long parse_count(const std::string& what) {
    if (peek().kind != TokenKind::integer) fail("expected integer after " + what);
    try {
      return std::stoll(advance().value);
    } catch (const std::exception&) {
      fail(what + " value out of range");
    }
  }

  bool starts_call() const {
    const Token& t = peek();
    if (t.kind == TokenKind::name) {
      const std::string u = upper(t);
      return builtin_names().count(u) > 0 || aggregate_names().count(u) > 0;
    }
    return (t.kind == TokenKind::pname || t.kind == TokenKind::iri_ref) && is_punct("(", 1);
  }

  // ---- graph patterns -------------------------------------------------
  GroupPattern parse_group() {
    expect_punct("{");
    if (is_keyword("SELECT")) throw NotAnalyzable{"sub-select"};
    GroupPattern group;
    while (!is_punct("}")) {
      if (peek().kind == TokenKind::end) fail("unclosed '{'");
      if (is_keyword("OPTIONAL")) {
        advance();
        PatternElement el;
        el.kind = ElementKind::optional;
        el.group = std::make_shared<const GroupPattern>(parse_group());
        group.elements.push_back(std::move(el));
      } else if (is_punct("{")) {
        PatternElement el;
        el.kind = ElementKind::group;
        el.group = std::make_shared<const GroupPattern>(parse_group());
        if (is_keyword("UNION")) throw NotAnalyzable{"UNION"};
        group.elements.push_back(std::move(el));
      } else if (is_keyword("FILTER")) {
        advance();
        PatternElement el;
        el.kind = ElementKind::filter;
        if (is_keyword("NOT") || is_keyword("EXISTS")) throw NotAnalyzable{"FILTER EXISTS"};
        if (is_punct("(")) {
          advance();
          el.expr = parse_expression();
          expect_punct(")");
        } else if (starts_call()) {
          el.expr = parse_primary();
        } else {
          fail("expected filter constraint");
        }
        group.elements.push_back(std::move(el));
      } else if (is_keyword("BIND")) {
        advance();
        expect_punct("(");
        PatternElement el;
        el.kind = ElementKind::bind;
        el.expr = parse_expression();
        expect_keyword("AS");
        if (peek().kind != TokenKind::var) fail("expected variable after AS");
        el.variable = advance().value;
        expect_punct(")");
        group.elements.push_back(std::move(el));
      } else if (is_keyword("VALUES")) {
        advance();
        PatternElement el;
        el.kind = ElementKind::values;
        el.values = parse_values();
        group.elements.push_back(std::move(el));
      } else if (is_keyword("MINUS") || is_keyword("GRAPH") || is_keyword("SERVICE")) {
        throw NotAnalyzable{upper(peek()) + " pattern"};
      } else if (is_punct(".")) {
        advance();
      } else {
        parse_triples_same_subject(group.elements);
        if (is_punct(".")) advance();
        else if (!is_punct("}") && !starts_non_triples()) fail("expected '.' or '}'");
      }
    }
    advance();  // }
    return group;
  }

  bool starts_non_triples() const {
    return is_punct("{") || is_keyword("OPTIONAL") || is_keyword("FILTER") ||
           is_keyword("BIND") || is_keyword("VALUES") || is_keyword("MINUS") ||
           is_keyword("GRAPH") || is_keyword("SERVICE");
  }

  ValuesBlock parse_values() {
    ValuesBlock block;
    const bool single = peek().kind == TokenKind::var;
    if (single) {
      block.variables.push_back(advance().value);
    } else {
      expect_punct("(");
      while (peek().kind == TokenKind::var) block.variables.push_back(advance().value);
      expect_punct(")");
    }
    expect_punct("{");
    while (!is_punct("}")) {
      std::vector<std::optional<RdfTerm>> row;
      if (single) {
        row.push_back(parse_data_value());
      } else {
        expect_punct("(");
        while (!is_punct(")")) row.push_back(parse_data_value());
        advance();
        if (row.size() != block.variables.size()) fail("VALUES row arity mismatch");
      }
      block.rows.push_back(std::move(row));
    }
    advance();
    return block;
  }

  std::optional<RdfTerm> parse_data_value() {
    if (is_keyword("UNDEF")) {
      advance();
      return std::nullopt;
    }
    const Token& t = peek();
    if (t.kind == TokenKind::iri_ref || t.kind == TokenKind::pname) return parse_iri();
    if (auto lit = try_parse_term_literal()) return lit;
    fail("expected IRI, literal or UNDEF in VALUES");
  }

  void parse_triples_same_subject(std::vector<PatternElement>& out) {
    const Token& t = peek();
    PatternTerm subject;
    if (is_punct("[")) {
      subject = parse_blank_property_list(out);
      // "[ :p :o ] ." may stand alone.
      if (is_punct(".") || is_punct("}")) return;
    } else if (is_punct("(")) {
      throw NotAnalyzable{"RDF collection"};
    } else if (t.kind == TokenKind::var) {
      subject = Variable{advance().value, false};
    } else if (t.kind == TokenKind::blank_label) {
      subject = Variable{advance().value, true};
    } else if (t.kind == TokenKind::iri_ref || t.kind == TokenKind::pname) {
      subject = parse_iri();
    } else if (auto lit = try_parse_term_literal()) {
      subject = *lit;
    } else {
      fail("expected triple pattern");
    }
    parse_property_list(subject, out);
  }

  PatternTerm parse_blank_property_list(std::vector<PatternElement>& out) {
    advance();  // [
    Variable node{"_anon" + std::to_string(anon_counter_++), true};
    if (!is_punct("]")) parse_property_list(node, out);
    expect_punct("]");
    return node;
  }

  bool starts_verb() const {
    const Token& t = peek();
    return t.kind == TokenKind::var || t.kind == TokenKind::iri_ref ||
           t.kind == TokenKind::pname || (t.kind == TokenKind::name && t.value == "a");
  }

  void parse_property_list(const PatternTerm& subject, std::vector<PatternElement>& out) {
    while (true) {
      if (is_punct("^") || is_punct("!") || is_punct("(")) throw NotAnalyzable{"property path"};
      PatternTerm verb;
      const Token& t = peek();
      if (t.kind == TokenKind::var) {
        verb = Variable{advance().value, false};
      } else if (t.kind == TokenKind::name && t.value == "a") {
        advance();
        verb = RdfTerm::iri(kRdfType);
      } else if (t.kind == TokenKind::iri_ref || t.kind == TokenKind::pname) {
        verb = parse_iri();
      } else {
        fail("expected predicate");
      }
      if (is_punct("/") || is_punct("|") || is_punct("*") || is_punct("+") || is_punct("?")) {
        throw NotAnalyzable{"property path"};
      }
      parse_object_list(subject, verb, out);
      if (!is_punct(";")) break;
      while (is_punct(";")) advance();
      if (!starts_verb() && !is_punct("^") && !is_punct("!")) break;
    }
  }

  void parse_object_list(const PatternTerm& subject, const PatternTerm& verb,
                         std::vector<PatternElement>& out) {
    while (true) {
      PatternTerm object;
      const Token& t = peek();
      // Nested triples from a blank node property list are emitted before
      // the triple that references the node.
      if (is_punct("[")) {
        object = parse_blank_property_list(out);
      } else if (is_punct("(")) {
        throw NotAnalyzable{"RDF collection"};
      } else if (t.kind == TokenKind::var) {
        object = Variable{advance().value, false};
      } else if (t.kind == TokenKind::blank_label) {
        object = Variable{advance().value, true};
      } else if (t.kind == TokenKind::iri_ref || t.kind == TokenKind::pname) {
        object = parse_iri();
      } else if (auto lit = try_parse_term_literal()) {
        object = *lit;
      } else {
        fail("expected object");
      }
      PatternElement el;
      el.kind = ElementKind::triple;
      el.triple = {subject, verb, object};
      out.push_back(std::move(el));
      if (!is_punct(",")) break;
      advance();
    }
  }

  RdfTerm parse_iri() {
    const Token& t = peek();
    if (t.kind == TokenKind::iri_ref) return RdfTerm::iri(advance().value);
    if (t.kind != TokenKind::pname) fail("expected IRI");
    return RdfTerm::iri(expand_pname(advance()));
  }

  std::string expand_pname(const Token& t) {
    const auto colon = t.value.find(':');
    const std::string prefix = t.value.substr(0, colon);
    const std::string local = t.value.substr(colon + 1);
    if (auto it = prefix_map_.find(prefix); it != prefix_map_.end()) return it->second + local;
    const auto& standard = schema::standard_prefixes();
    if (auto it = standard.find(prefix); it != standard.end()) return it->second + local;
    fail_at("undeclared prefix '" + prefix + ":'", t.offset);
  }

  // Literal in a triple or VALUES position, where "-4" is one signed number.
  std::optional<RdfTerm> try_parse_term_literal() {
    if ((is_punct("-") || is_punct("+")) && peek(1).offset == peek().offset + 1 &&
        (peek(1).kind == TokenKind::integer || peek(1).kind == TokenKind::decimal ||
         peek(1).kind == TokenKind::double_)) {
      const std::string sign = advance().value;
      auto lit = try_parse_literal();
      lit->value = sign + lit->value;
      return lit;
    }
    return try_parse_literal();
  }

  std::optional<RdfTerm> try_parse_literal() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::string: {
        std::string value = advance().value;
        if (peek().kind == TokenKind::lang_tag) {
          return RdfTerm::literal(std::move(value), {}, text::to_lower(advance().value));
        }
        if (is_punct("^^")) {
          advance();
          return RdfTerm::literal(std::move(value), parse_iri().value);
        }
        return RdfTerm::literal(std::move(value));
      }
      case TokenKind::integer: return RdfTerm::literal(advance().value, xsd::kInteger);
      case TokenKind::decimal: return RdfTerm::literal(advance().value, xsd::kDecimal);
      case TokenKind::double_: return RdfTerm::literal(advance().value, xsd::kDouble);
      case TokenKind::name: {
        const std::string lower = text::to_lower(t.value);
        if (lower == "true" || lower == "false") {
          advance();
          return RdfTerm::boolean(lower == "true");
        }
        return std::nullopt;
      }
      default: return std::nullopt;
    }
  }

  // ---- expressions ----------------------------------------------------
  static ExprPtr var_expr(std::string name) {
    Expression e;
    e.kind = ExprKind::variable;
    e.name = std::move(name);
    return make_expr(std::move(e));
  }

  static ExprPtr binary(std::string op, ExprPtr lhs, ExprPtr rhs) {
    Expression e;
    e.kind = ExprKind::binary;
    e.name = std::move(op);
    e.args = {std::move(lhs), std::move(rhs)};
    return make_expr(std::move(e));
  }

  ExprPtr parse_expression() { return parse_or(); }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    while (is_punct("||")) {
      advance();
      lhs = binary("||", lhs, parse_and());
    }
    return lhs;
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_relational();
    while (is_punct("&&")) {
      advance();
      lhs = binary("&&", lhs, parse_relational());
    }
    return lhs;
  }

  ExprPtr parse_relational() {
    ExprPtr lhs = parse_additive();
    static constexpr std::string_view kOps[] = {"=", "!=", "<", ">", "<=", ">="};
    for (auto op : kOps) {
      if (is_punct(op)) {
        advance();
        return binary(std::string(op), lhs, parse_additive());
      }
    }
    const bool negated = is_keyword("NOT") && is_keyword("IN", 1);
    if (negated || is_keyword("IN")) {
      advance();
      if (negated) advance();
      Expression e;
      e.kind = ExprKind::in_list;
      e.negated = negated;
      e.args.push_back(lhs);
      expect_punct("(");
      if (!is_punct(")")) {
        e.args.push_back(parse_expression());
        while (is_punct(",")) {
          advance();
          e.args.push_back(parse_expression());
        }
      }
      expect_punct(")");
      return make_expr(std::move(e));
    }
    return lhs;
  }

  ExprPtr parse_additive() {
    ExprPtr lhs = parse_multiplicative();
    while (is_punct("+") || is_punct("-")) {
      std::string op = advance().value;
      lhs = binary(op, lhs, parse_multiplicative());
    }
    return lhs;
  }

  ExprPtr parse_multiplicative() {
    ExprPtr lhs = parse_unary();
    while (is_punct("*") || is_punct("/")) {
      std::string op = advance().value;
      lhs = binary(op, lhs, parse_unary());
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (is_punct("!") || is_punct("-") || is_punct("+")) {
      Expression e;
      e.kind = ExprKind::unary;
      e.name = advance().value;
      e.args.push_back(parse_unary());
      return make_expr(std::move(e));
    }
    return parse_primary();
  }

  std::vector<ExprPtr> parse_arg_list() {
    std::vector<ExprPtr> args;
    expect_punct("(");
    if (is_punct(")")) {
      advance();
      return args;
    }
    args.push_back(parse_expression());
    while (is_punct(",")) {
      advance();
      args.push_back(parse_expression());
    }
    expect_punct(")");
    return args;
  }

  ExprPtr parse_primary() {
    const Token& t = peek();
    if (is_punct("(")) {
      advance();
      ExprPtr e = parse_expression();
      expect_punct(")");
      return e;
    }
    if (t.kind == TokenKind::var) return var_expr(advance().value);
    if (t.kind == TokenKind::iri_ref || t.kind == TokenKind::pname) {
      RdfTerm iri = parse_iri();
      if (is_punct("(")) {
        Expression e;
        e.kind = ExprKind::call;
        e.iri_function = true;
        e.name = iri.value;
        e.args = parse_arg_list();
        return make_expr(std::move(e));
      }
      Expression e;
      e.kind = ExprKind::constant;
      e.constant = std::move(iri);
      return make_expr(std::move(e));
    }
    if (t.kind == TokenKind::name) {
      const std::string u = upper(t);
      if (u == "EXISTS" || u == "NOT") throw NotAnalyzable{"EXISTS expression"};
      if (u == "GROUP_CONCAT" || u == "SAMPLE") throw NotAnalyzable{u + " aggregate"};
      if (aggregate_names().count(u)) return parse_aggregate();
      if (builtin_names().count(u)) {
        const std::size_t at = t.offset;
        advance();
        Expression e;
        e.kind = ExprKind::call;
        e.name = u;
        if (u == "BOUND") {
          expect_punct("(");
          if (peek().kind != TokenKind::var) fail("BOUND expects a variable");
          e.args.push_back(var_expr(advance().value));
          expect_punct(")");
        } else {
          e.args = parse_arg_list();
        }
        (void)at;
        return make_expr(std::move(e));
      }
    }
    if (t.kind == TokenKind::string || t.kind == TokenKind::integer ||
        t.kind == TokenKind::decimal || t.kind == TokenKind::double_ ||
        t.kind == TokenKind::name) {
      if (auto lit = try_parse_literal()) {
        Expression e;
        e.kind = ExprKind::constant;
        e.constant = std::move(*lit);
        return make_expr(std::move(e));
      }
    }
    fail("expected expression");
  }

  ExprPtr parse_aggregate() {
    Expression e;
    e.kind = ExprKind::aggregate;
    e.name = upper(advance());
    expect_punct("(");
    if (is_keyword("DISTINCT")) {
      e.distinct = true;
      advance();
    }
    if (is_punct("*")) {
      if (e.name != "COUNT") fail("'*' is only allowed in COUNT");
      e.star = true;
      advance();
    } else {
      e.args.push_back(parse_expression());
    }
    if (is_punct(";")) throw NotAnalyzable{"aggregate separator"};
    expect_punct(")");
    return make_expr(std::move(e));
  }

  std::string_view text_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::map<std::string, std::string> prefix_map_;
  std::vector<std::pair<std::string, std::string>> prefixes_;
  int anon_counter_ = 0;
};

// ---- analysis helpers ---------------------------------------------------

void collect_expr_iris(const Expression& e, std::set<std::string>& out) {
  if (e.kind == ExprKind::constant && e.constant.is_iri()) out.insert(e.constant.value);
  for (const auto& a : e.args) collect_expr_iris(*a, out);
}

void collect_group(const GroupPattern& g, std::set<std::string>& iris,
                   std::vector<std::string>& vars) {
  auto add_var = [&](const std::string& v) {
    if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
  };
  auto visit_term = [&](const PatternTerm& t) {
    if (const auto* v = std::get_if<Variable>(&t)) {
      if (!v->blank) add_var(v->name);
    } else {
      const auto& term = std::get<RdfTerm>(t);
      if (term.is_iri()) iris.insert(term.value);
    }
  };
  for (const auto& el : g.elements) {
    switch (el.kind) {
      case ElementKind::triple:
        visit_term(el.triple.subject);
        visit_term(el.triple.predicate);
        visit_term(el.triple.object);
        break;
      case ElementKind::optional:
      case ElementKind::group: collect_group(*el.group, iris, vars); break;
      case ElementKind::filter: collect_expr_iris(*el.expr, iris); break;
      case ElementKind::bind:
        collect_expr_iris(*el.expr, iris);
        add_var(el.variable);
        break;
      case ElementKind::values:
        for (const auto& v : el.values.variables) add_var(v);
        for (const auto& row : el.values.rows) {
          for (const auto& cell : row) {
            if (cell && cell->is_iri()) iris.insert(cell->value);
          }
        }
        break;
    }
  }
}

// Used for queries outside the analyzable subset: checks bracket balance,
// determines the form and a best-effort projection.
ParsedQuery lightweight_parse(std::string_view text, const std::vector<Token>& tokens,
                              const std::vector<std::pair<std::string, std::string>>& prefixes,
                              std::string reason) {
  std::vector<const Token*> stack;
  for (const auto& t : tokens) {
    if (t.kind != TokenKind::punct) continue;
    if (t.value == "{" || t.value == "(" || t.value == "[") {
      stack.push_back(&t);
    } else if (t.value == "}" || t.value == ")" || t.value == "]") {
      const char open = t.value == "}" ? '{' : t.value == ")" ? '(' : '[';
      if (stack.empty() || stack.back()->value[0] != open) {
        throw SyntaxError("unbalanced '" + t.value + "'", t.offset, position_of(text, t.offset));
      }
      stack.pop_back();
    }
  }
  if (!stack.empty()) {
    throw SyntaxError("unclosed '" + stack.back()->value + "'", stack.back()->offset,
                      position_of(text, stack.back()->offset));
  }

  ParsedQuery q;
  q.text = std::string(text);
  q.analyzable = false;
  q.not_analyzable_reason = std::move(reason);
  for (const auto& [label, ns] : prefixes) q.prefix_map[label] = ns;

  std::size_t i = 0;
  while (i < tokens.size() && tokens[i].kind != TokenKind::end) {
    const std::string u = text::to_upper(tokens[i].value);
    if (tokens[i].kind == TokenKind::name && (u == "SELECT" || u == "ASK")) break;
    ++i;
  }
  if (i < tokens.size() && text::to_upper(tokens[i].value) == "ASK") {
    q.form = QueryForm::ask;
    return q;
  }
  q.form = QueryForm::select;
  int depth = 0;
  for (++i; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.kind == TokenKind::punct && t.value == "(") ++depth;
    if (t.kind == TokenKind::punct && t.value == ")") --depth;
    if (t.kind == TokenKind::punct && t.value == "{") break;
    if (t.kind == TokenKind::name &&
        (text::to_upper(t.value) == "WHERE" || text::to_upper(t.value) == "FROM")) {
      break;
    }
    const bool after_as = i > 0 && tokens[i - 1].kind == TokenKind::name &&
                          text::to_upper(tokens[i - 1].value) == "AS";
    if (t.kind == TokenKind::var && (depth == 0 || after_as)) q.projected_vars.push_back(t.value);
  }
  return q;
}

}  // namespace

std::string_view to_string(QueryForm form) { return form == QueryForm::ask ? "ASK" : "SELECT"; }

bool contains_aggregate(const Expression& expr) {
  if (expr.kind == ExprKind::aggregate) return true;
  return std::any_of(expr.args.begin(), expr.args.end(),
                     [](const ExprPtr& a) { return contains_aggregate(*a); });
}

bool QueryModel::is_aggregate_query() const {
  if (!group_by.empty()) return true;
  for (const auto& p : projections) {
    if (p.expr && contains_aggregate(*p.expr)) return true;
  }
  for (const auto& o : order_by) {
    if (contains_aggregate(*o.expr)) return true;
  }
  return false;
}

ParsedQuery parse_query(std::string_view text) {
  if (text::trim(text).empty()) throw PreconditionError("query text must not be empty");
  auto tokens = detail::tokenize(text);
  Parser parser(text, tokens);
  QueryModel model;
  try {
    model = parser.parse();
  } catch (const NotAnalyzable& na) {
    return lightweight_parse(text, tokens, parser.prefixes(), na.reason);
  }

  ParsedQuery q;
  q.text = std::string(text);
  q.form = model.form;
  for (const auto& [label, ns] : model.prefixes) q.prefix_map[label] = ns;

  std::vector<std::string> in_scope;
  collect_group(model.where, q.referenced_iris, in_scope);
  for (const auto& p : model.projections) {
    if (p.expr) collect_expr_iris(*p.expr, q.referenced_iris);
  }
  for (const auto& g : model.group_by) collect_expr_iris(*g.expr, q.referenced_iris);
  for (const auto& o : model.order_by) collect_expr_iris(*o.expr, q.referenced_iris);

  if (model.form == QueryForm::select) {
    if (model.select_all) {
      q.projected_vars = in_scope;
    } else {
      for (const auto& p : model.projections) q.projected_vars.push_back(p.variable);
    }
  }
  q.model = std::make_shared<const QueryModel>(std::move(model));
  return q;
}

}  // namespace compass::sparql
