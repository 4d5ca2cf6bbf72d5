#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

#include "compass/common/digest.hpp"
#include "compass/common/text.hpp"
#include "compass/sparql/triple_store.hpp"

namespace compass::sparql {

namespace {

using Value = std::optional<RdfTerm>;  // nullopt = unbound or error

// ---- numerics -------------------------------------------------------------

enum class NumKind { integer, decimal, dbl };

struct Number {
  NumKind kind = NumKind::integer;
  long long i = 0;
  double d = 0;

  double as_double() const { return kind == NumKind::integer ? static_cast<double>(i) : d; }
};

std::optional<Number> to_number(const Value& v) {
  if (!v || !v->is_literal() || !is_numeric_datatype(v->datatype)) return std::nullopt;
  const std::string& s = v->value;
  Number n;
  if (is_integer_datatype(v->datatype)) {
    n.kind = NumKind::integer;
    auto first = s.data();
    if (!s.empty() && s[0] == '+') ++first;
    auto [p, ec] = std::from_chars(first, s.data() + s.size(), n.i);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return n;
  }
  n.kind = v->datatype == xsd::kDecimal ? NumKind::decimal : NumKind::dbl;
  try {
    std::size_t used = 0;
    n.d = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return n;
}

std::string format_decimal(double d) {
  if (!std::isfinite(d)) return "NaN";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d, std::chars_format::fixed);
  std::string s(buf, p);
  if (s.find('.') == std::string::npos) s += ".0";
  // Trim noise from binary fractions, keep at least one fractional digit.
  if (s.size() > 24) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(12) << d;
    s = o.str();
    while (s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  }
  return s;
}

std::string format_double(double d) {
  if (std::isnan(d)) return "NaN";
  if (std::isinf(d)) return d > 0 ? "INF" : "-INF";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d, std::chars_format::scientific);
  return std::string(buf, p);
}

RdfTerm from_number(const Number& n) {
  switch (n.kind) {
    case NumKind::integer: return RdfTerm::integer(n.i);
    case NumKind::decimal: return RdfTerm::literal(format_decimal(n.d), xsd::kDecimal);
    case NumKind::dbl: return RdfTerm::literal(format_double(n.d), xsd::kDouble);
  }
  return {};
}

RdfTerm make_decimal(double d) { return from_number({NumKind::decimal, 0, d}); }

Value arithmetic(const std::string& op, const Number& a, const Number& b) {
  const NumKind kind = std::max(a.kind, b.kind);
  if (kind == NumKind::integer && op != "/") {
    long long r = 0;
    bool overflow = false;
    if (op == "+") overflow = __builtin_add_overflow(a.i, b.i, &r);
    else if (op == "-") overflow = __builtin_sub_overflow(a.i, b.i, &r);
    else overflow = __builtin_mul_overflow(a.i, b.i, &r);
    if (overflow) return std::nullopt;
    return RdfTerm::integer(r);
  }
  const double x = a.as_double();
  const double y = b.as_double();
  double r = 0;
  if (op == "+") r = x + y;
  else if (op == "-") r = x - y;
  else if (op == "*") r = x * y;
  else {
    if (y == 0 && kind != NumKind::dbl) return std::nullopt;
    r = x / y;
  }
  return from_number({kind == NumKind::integer ? NumKind::decimal : kind, 0, r});
}

// ---- term helpers ---------------------------------------------------------

bool is_stringlike(const RdfTerm& t) {
  return t.is_literal() && (t.datatype.empty() || t.datatype == xsd::kString);
}

std::optional<bool> effective_boolean(const Value& v) {
  if (!v || !v->is_literal()) return std::nullopt;
  if (v->datatype == xsd::kBoolean) return v->value == "true" || v->value == "1";
  if (is_stringlike(*v)) return !v->value.empty();
  if (auto n = to_number(v)) return n->as_double() != 0 && !std::isnan(n->as_double());
  return std::nullopt;
}

RdfTerm normalize(RdfTerm t) {
  if (t.is_literal() && t.datatype == xsd::kString) t.datatype.clear();
  return t;
}

// Total order used by ORDER BY, MIN and MAX.
int kind_rank(const Value& v) {
  if (!v) return 0;
  switch (v->kind) {
    case TermKind::blank: return 1;
    case TermKind::iri: return 2;
    case TermKind::literal: return 3;
  }
  return 3;
}

int compare_values(const Value& a, const Value& b) {
  const int ra = kind_rank(a);
  const int rb = kind_rank(b);
  if (ra != rb) return ra < rb ? -1 : 1;
  if (!a) return 0;
  auto na = to_number(a);
  auto nb = to_number(b);
  if (na && nb) {
    if (na->kind == NumKind::integer && nb->kind == NumKind::integer) {
      return na->i < nb->i ? -1 : na->i > nb->i ? 1 : 0;
    }
    const double x = na->as_double();
    const double y = nb->as_double();
    if (x < y) return -1;
    if (x > y) return 1;
  } else if (na || nb) {
    return na ? -1 : 1;  // numbers sort before other literals
  }
  if (int c = a->value.compare(b->value); c != 0) return c < 0 ? -1 : 1;
  if (int c = a->datatype.compare(b->datatype); c != 0) return c < 0 ? -1 : 1;
  if (int c = a->lang.compare(b->lang); c != 0) return c < 0 ? -1 : 1;
  return 0;
}

// SPARQL operator semantics for =, !=, <, ... ; nullopt on type error.
std::optional<bool> relational(const std::string& op, const Value& a, const Value& b) {
  if (!a || !b) return std::nullopt;
  auto na = to_number(a);
  auto nb = to_number(b);
  int c = 0;
  if (na && nb) {
    c = compare_values(a, b);
  } else if (is_stringlike(*a) && is_stringlike(*b)) {
    c = a->value.compare(b->value);
    c = c < 0 ? -1 : c > 0 ? 1 : 0;
  } else if (a->is_literal() && b->is_literal() && a->datatype == b->datatype &&
             a->lang == b->lang && !a->datatype.empty()) {
    c = a->value.compare(b->value);  // dates, booleans: lexical order suffices here
    c = c < 0 ? -1 : c > 0 ? 1 : 0;
  } else {
    if (op == "=") return normalize(*a) == normalize(*b);
    if (op == "!=") return !(normalize(*a) == normalize(*b));
    return std::nullopt;
  }
  if (op == "=") return c == 0;
  if (op == "!=") return c != 0;
  if (op == "<") return c < 0;
  if (op == ">") return c > 0;
  if (op == "<=") return c <= 0;
  return c >= 0;
}

std::string year_part(const std::string& lexical, int field) {
  // YYYY-MM-DD[Thh:mm:ss...]
  static const std::regex re(R"(^(-?\d{4,})-(\d{2})-(\d{2}).*$)");
  std::smatch m;
  if (!std::regex_match(lexical, m, re)) return {};
  return m[field].str();
}

// ---- evaluation context ---------------------------------------------------

struct Context {
  const Row* row = nullptr;
  const std::vector<const Row*>* group = nullptr;  // set while evaluating aggregates
};

std::string blank_var(const std::string& name) { return "_:" + name; }

Value eval(const Expression& e, const Context& ctx);

Value eval_aggregate(const Expression& e, const Context& ctx) {
  if (!ctx.group) throw EvaluationError("aggregate " + e.name + " used outside a grouped query");
  const auto& rows = *ctx.group;
  if (e.star) {
    if (!e.distinct) return RdfTerm::integer(static_cast<long long>(rows.size()));
    std::set<Row> distinct;
    for (const Row* r : rows) distinct.insert(*r);
    return RdfTerm::integer(static_cast<long long>(distinct.size()));
  }
  std::vector<RdfTerm> values;
  bool had_error = false;
  for (const Row* r : rows) {
    Value v = eval(*e.args.at(0), Context{r, nullptr});
    if (v) values.push_back(*v);
    else had_error = true;
  }
  if (e.distinct) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
  }
  if (e.name == "COUNT") return RdfTerm::integer(static_cast<long long>(values.size()));
  if (e.name == "SUM" || e.name == "AVG") {
    if (had_error) return std::nullopt;
    Value total = RdfTerm::integer(0);
    for (const auto& v : values) {
      auto a = to_number(total);
      auto b = to_number(v);
      if (!b) return std::nullopt;
      total = arithmetic("+", *a, *b);
      if (!total) return std::nullopt;
    }
    if (e.name == "SUM") return total;
    if (values.empty()) return RdfTerm::integer(0);
    return arithmetic("/", *to_number(total),
                      Number{NumKind::integer, static_cast<long long>(values.size()), 0});
  }
  // MIN / MAX
  if (values.empty()) return std::nullopt;
  const bool want_min = e.name == "MIN";
  Value best = values.front();
  for (const auto& v : values) {
    const int c = compare_values(Value(v), best);
    if (want_min ? c < 0 : c > 0) best = v;
  }
  return best;
}

Value cast_to(const std::string& datatype, const Value& v) {
  if (!v) return std::nullopt;
  const RdfTerm& t = *v;
  if (datatype == xsd::kString) {
    if (t.is_blank()) return std::nullopt;
    return RdfTerm::literal(t.value, xsd::kString);
  }
  if (!t.is_literal()) return std::nullopt;
  const std::string lex = text::trim(t.value);
  if (datatype == xsd::kInteger) {
    if (auto n = to_number(v)) {
      if (n->kind == NumKind::integer) return RdfTerm::integer(n->i);
      if (!std::isfinite(n->d)) return std::nullopt;
      return RdfTerm::integer(static_cast<long long>(std::trunc(n->d)));
    }
    if (t.datatype == xsd::kBoolean) return RdfTerm::integer(t.value == "true" ? 1 : 0);
    return to_number(RdfTerm::literal(lex, xsd::kInteger)) ? Value(RdfTerm::literal(lex, xsd::kInteger))
                                                           : std::nullopt;
  }
  if (datatype == xsd::kDecimal || datatype == xsd::kDouble || datatype == xsd::kFloat) {
    std::optional<Number> n = to_number(v);
    if (!n) n = to_number(RdfTerm::literal(lex, xsd::kDouble));
    if (!n) return std::nullopt;
    if (datatype == xsd::kDecimal) return make_decimal(n->as_double());
    return RdfTerm::literal(format_double(n->as_double()), datatype);
  }
  if (datatype == xsd::kBoolean) {
    if (lex == "true" || lex == "1") return RdfTerm::boolean(true);
    if (lex == "false" || lex == "0") return RdfTerm::boolean(false);
    if (auto n = to_number(v)) return RdfTerm::boolean(n->as_double() != 0);
    return std::nullopt;
  }
  if (datatype == xsd::kDate || datatype == xsd::kDateTime || datatype == xsd::kGYear) {
    return RdfTerm::literal(lex, datatype);
  }
  return std::nullopt;
}

std::optional<std::string> string_arg(const Value& v) {
  if (!v || !v->is_literal()) return std::nullopt;
  return v->value;
}

RdfTerm string_like(std::string value, const RdfTerm& model) {
  RdfTerm out = RdfTerm::literal(std::move(value));
  if (model.is_literal()) {
    out.lang = model.lang;
    if (model.datatype == xsd::kString) out.datatype = xsd::kString;
  }
  return out;
}

Value eval_call(const Expression& e, const Context& ctx) {
  const std::string& f = e.name;
  if (e.iri_function) {
    if (e.args.size() != 1) return std::nullopt;
    return cast_to(f, eval(*e.args[0], ctx));
  }
  if (f == "BOUND") {
    const auto& name = e.args.at(0)->name;
    return RdfTerm::boolean(ctx.row && ctx.row->count(name) > 0);
  }
  if (f == "COALESCE") {
    for (const auto& a : e.args) {
      if (Value v = eval(*a, ctx)) return v;
    }
    return std::nullopt;
  }
  if (f == "IF") {
    if (e.args.size() != 3) return std::nullopt;
    auto cond = effective_boolean(eval(*e.args[0], ctx));
    if (!cond) return std::nullopt;
    return eval(*e.args[*cond ? 1 : 2], ctx);
  }
  std::vector<Value> a;
  for (const auto& arg : e.args) a.push_back(eval(*arg, ctx));
  auto arity = [&](std::size_t n) { return a.size() == n; };

  if (f == "STR" && arity(1)) {
    if (!a[0] || a[0]->is_blank()) return std::nullopt;
    return RdfTerm::literal(a[0]->value);
  }
  if (f == "LANG" && arity(1)) {
    if (!a[0] || !a[0]->is_literal()) return std::nullopt;
    return RdfTerm::literal(a[0]->lang);
  }
  if (f == "DATATYPE" && arity(1)) {
    if (!a[0] || !a[0]->is_literal()) return std::nullopt;
    if (!a[0]->lang.empty()) return RdfTerm::iri(kRdfLangString);
    return RdfTerm::iri(a[0]->datatype.empty() ? xsd::kString : a[0]->datatype);
  }
  if ((f == "IRI" || f == "URI") && arity(1)) {
    if (!a[0]) return std::nullopt;
    return RdfTerm::iri(a[0]->value);
  }
  if (f == "ISIRI" || f == "ISURI") return arity(1) && a[0] ? Value(RdfTerm::boolean(a[0]->is_iri())) : std::nullopt;
  if (f == "ISBLANK") return arity(1) && a[0] ? Value(RdfTerm::boolean(a[0]->is_blank())) : std::nullopt;
  if (f == "ISLITERAL") return arity(1) && a[0] ? Value(RdfTerm::boolean(a[0]->is_literal())) : std::nullopt;
  if (f == "ISNUMERIC") return arity(1) && a[0] ? Value(RdfTerm::boolean(to_number(a[0]).has_value())) : std::nullopt;
  if (f == "SAMETERM" && arity(2)) {
    if (!a[0] || !a[1]) return std::nullopt;
    return RdfTerm::boolean(*a[0] == *a[1]);
  }
  if ((f == "ABS" || f == "CEIL" || f == "FLOOR" || f == "ROUND") && arity(1)) {
    auto n = to_number(a[0]);
    if (!n) return std::nullopt;
    if (n->kind == NumKind::integer) {
      if (f == "ABS") return RdfTerm::integer(n->i < 0 ? -n->i : n->i);
      return RdfTerm::integer(n->i);
    }
    double r = n->d;
    if (f == "ABS") r = std::fabs(r);
    else if (f == "CEIL") r = std::ceil(r);
    else if (f == "FLOOR") r = std::floor(r);
    else r = std::floor(r + 0.5);
    n->d = r;
    return from_number(*n);
  }
  if (f == "CONCAT") {
    std::string out;
    for (const auto& v : a) {
      auto s = string_arg(v);
      if (!s) return std::nullopt;
      out += *s;
    }
    return RdfTerm::literal(out);
  }
  if (f == "STRLEN" && arity(1)) {
    auto s = string_arg(a[0]);
    if (!s) return std::nullopt;
    long long n = 0;
    for (unsigned char c : *s) n += (c & 0xC0) != 0x80;
    return RdfTerm::integer(n);
  }
  if ((f == "UCASE" || f == "LCASE") && arity(1)) {
    auto s = string_arg(a[0]);
    if (!s) return std::nullopt;
    return string_like(f == "UCASE" ? text::to_upper(*s) : text::to_lower(*s), *a[0]);
  }
  if (f == "SUBSTR" && (arity(2) || arity(3))) {
    auto s = string_arg(a[0]);
    auto start = to_number(a[1]);
    if (!s || !start) return std::nullopt;
    // Operates on code points; 1-based start.
    std::vector<std::string> cps;
    for (std::size_t i = 0; i < s->size();) {
      std::size_t len = 1;
      while (i + len < s->size() && ((*s)[i + len] & 0xC0) == 0x80) ++len;
      cps.push_back(s->substr(i, len));
      i += len;
    }
    long long from = static_cast<long long>(std::llround(start->as_double()));
    long long to = static_cast<long long>(cps.size()) + 1;
    if (arity(3)) {
      auto len = to_number(a[2]);
      if (!len) return std::nullopt;
      to = from + static_cast<long long>(std::llround(len->as_double()));
    }
    std::string out;
    for (long long i = std::max(from, 1LL); i < to && i <= static_cast<long long>(cps.size()); ++i) {
      out += cps[static_cast<std::size_t>(i - 1)];
    }
    return string_like(out, *a[0]);
  }
  if ((f == "CONTAINS" || f == "STRSTARTS" || f == "STRENDS" || f == "STRBEFORE" ||
       f == "STRAFTER") &&
      arity(2)) {
    auto s = string_arg(a[0]);
    auto t = string_arg(a[1]);
    if (!s || !t) return std::nullopt;
    if (f == "CONTAINS") return RdfTerm::boolean(s->find(*t) != std::string::npos);
    if (f == "STRSTARTS") return RdfTerm::boolean(s->rfind(*t, 0) == 0);
    if (f == "STRENDS") {
      return RdfTerm::boolean(s->size() >= t->size() &&
                              s->compare(s->size() - t->size(), t->size(), *t) == 0);
    }
    const auto pos = s->find(*t);
    if (pos == std::string::npos) return RdfTerm::literal("");
    if (f == "STRBEFORE") return string_like(s->substr(0, pos), *a[0]);
    return string_like(s->substr(pos + t->size()), *a[0]);
  }
  if ((f == "REGEX" && (arity(2) || arity(3))) || (f == "REPLACE" && (arity(3) || arity(4)))) {
    const bool replace = f == "REPLACE";
    auto s = string_arg(a[0]);
    auto pattern = string_arg(a[1]);
    const std::size_t flag_index = replace ? 3 : 2;
    std::optional<std::string> flags = a.size() > flag_index ? string_arg(a[flag_index])
                                                              : std::optional<std::string>("");
    if (!s || !pattern || !flags) return std::nullopt;
    auto syntax = std::regex::ECMAScript;
    if (flags->find('i') != std::string::npos) syntax |= std::regex::icase;
    try {
      std::regex re(*pattern, syntax);
      if (!replace) return RdfTerm::boolean(std::regex_search(*s, re));
      auto with = string_arg(a[2]);
      if (!with) return std::nullopt;
      return string_like(std::regex_replace(*s, re, *with), *a[0]);
    } catch (const std::regex_error&) {
      return std::nullopt;
    }
  }
  if (f == "LANGMATCHES" && arity(2)) {
    auto tag = string_arg(a[0]);
    auto range = string_arg(a[1]);
    if (!tag || !range) return std::nullopt;
    if (*range == "*") return RdfTerm::boolean(!tag->empty());
    const std::string lt = text::to_lower(*tag);
    const std::string lr = text::to_lower(*range);
    return RdfTerm::boolean(lt == lr || (lt.rfind(lr + "-", 0) == 0));
  }
  if ((f == "YEAR" || f == "MONTH" || f == "DAY") && arity(1)) {
    if (!a[0] || !a[0]->is_literal()) return std::nullopt;
    const std::string part = year_part(a[0]->value, f == "YEAR" ? 1 : f == "MONTH" ? 2 : 3);
    if (part.empty()) return std::nullopt;
    return RdfTerm::integer(std::stoll(part));
  }
  if (f == "STRLANG" && arity(2)) {
    auto s = string_arg(a[0]);
    auto l = string_arg(a[1]);
    if (!s || !l) return std::nullopt;
    return RdfTerm::literal(*s, {}, text::to_lower(*l));
  }
  if (f == "STRDT" && arity(2)) {
    auto s = string_arg(a[0]);
    if (!s || !a[1] || !a[1]->is_iri()) return std::nullopt;
    return RdfTerm::literal(*s, a[1]->value == xsd::kString ? "" : a[1]->value);
  }
  if (f == "SHA256" && arity(1)) {
    auto s = string_arg(a[0]);
    if (!s) return std::nullopt;
    return RdfTerm::literal(sha256_hex(*s));
  }
  throw EvaluationError("function " + f + " is not supported by the fixture endpoint");
}

Value eval(const Expression& e, const Context& ctx) {
  switch (e.kind) {
    case ExprKind::variable: {
      if (!ctx.row) return std::nullopt;
      auto it = ctx.row->find(e.name);
      if (it == ctx.row->end()) return std::nullopt;
      return it->second;
    }
    case ExprKind::constant: return normalize(e.constant);
    case ExprKind::unary: {
      Value v = eval(*e.args.at(0), ctx);
      if (e.name == "!") {
        auto b = effective_boolean(v);
        if (!b) return std::nullopt;
        return RdfTerm::boolean(!*b);
      }
      auto n = to_number(v);
      if (!n) return std::nullopt;
      if (e.name == "+") return from_number(*n);
      if (n->kind == NumKind::integer) {
        n->i = -n->i;
      } else {
        n->d = -n->d;
      }
      return from_number(*n);
    }
    case ExprKind::binary: {
      const std::string& op = e.name;
      if (op == "||" || op == "&&") {
        auto l = effective_boolean(eval(*e.args[0], ctx));
        auto r = effective_boolean(eval(*e.args[1], ctx));
        if (op == "||") {
          if ((l && *l) || (r && *r)) return RdfTerm::boolean(true);
          if (l && r) return RdfTerm::boolean(false);
          return std::nullopt;
        }
        if ((l && !*l) || (r && !*r)) return RdfTerm::boolean(false);
        if (l && r) return RdfTerm::boolean(true);
        return std::nullopt;
      }
      Value l = eval(*e.args[0], ctx);
      Value r = eval(*e.args[1], ctx);
      if (op == "+" || op == "-" || op == "*" || op == "/") {
        auto a = to_number(l);
        auto b = to_number(r);
        if (!a || !b) return std::nullopt;
        return arithmetic(op, *a, *b);
      }
      auto res = relational(op, l, r);
      if (!res) return std::nullopt;
      return RdfTerm::boolean(*res);
    }
    case ExprKind::in_list: {
      Value lhs = eval(*e.args[0], ctx);
      if (!lhs) return std::nullopt;
      bool error = false;
      for (std::size_t i = 1; i < e.args.size(); ++i) {
        auto eq = relational("=", lhs, eval(*e.args[i], ctx));
        if (eq && *eq) return RdfTerm::boolean(!e.negated);
        if (!eq) error = true;
      }
      if (error) return std::nullopt;
      return RdfTerm::boolean(e.negated);
    }
    case ExprKind::call: return eval_call(e, ctx);
    case ExprKind::aggregate: return eval_aggregate(e, ctx);
  }
  return std::nullopt;
}

// ---- pattern matching -----------------------------------------------------

std::string term_var(const PatternTerm& t) {
  const auto& v = std::get<Variable>(t);
  return v.blank ? blank_var(v.name) : v.name;
}

bool compatible(const Row& a, const Row& b) {
  for (const auto& [k, v] : b) {
    auto it = a.find(k);
    if (it != a.end() && !(it->second == v)) return false;
  }
  return true;
}

Row merge(Row a, const Row& b) {
  for (const auto& [k, v] : b) a.emplace(k, v);
  return a;
}

std::vector<Row> join(const std::vector<Row>& left, const std::vector<Row>& right) {
  std::vector<Row> out;
  for (const auto& l : left) {
    for (const auto& r : right) {
      if (compatible(l, r)) out.push_back(merge(l, r));
    }
  }
  return out;
}

std::vector<Row> match_triple(const TriplePattern& tp, const std::vector<Row>& input,
                              const TripleStore& store) {
  std::vector<Row> out;
  const PatternTerm* parts[3] = {&tp.subject, &tp.predicate, &tp.object};
  for (const auto& row : input) {
    std::optional<RdfTerm> fixed[3];
    for (int k = 0; k < 3; ++k) {
      if (const auto* t = std::get_if<RdfTerm>(parts[k])) {
        fixed[k] = normalize(*t);
      } else if (auto it = row.find(term_var(*parts[k])); it != row.end()) {
        fixed[k] = it->second;
      }
    }
    for (std::size_t idx : store.match(fixed[0], fixed[1], fixed[2])) {
      const Triple& t = store.triples()[idx];
      const RdfTerm* values[3] = {&t.subject, &t.predicate, &t.object};
      Row next = row;
      bool ok = true;
      for (int k = 0; k < 3 && ok; ++k) {
        if (fixed[k]) continue;
        auto [it, inserted] = next.emplace(term_var(*parts[k]), *values[k]);
        if (!inserted && !(it->second == *values[k])) ok = false;  // repeated variable
      }
      if (ok) out.push_back(std::move(next));
    }
  }
  return out;
}

std::vector<Row> eval_group(const GroupPattern& g, std::vector<Row> sols, const TripleStore& store) {
  std::vector<const Expression*> filters;
  for (const auto& el : g.elements) {
    switch (el.kind) {
      case ElementKind::triple: sols = match_triple(el.triple, sols, store); break;
      case ElementKind::optional: {
        std::vector<Row> out;
        for (const auto& s : sols) {
          auto extended = eval_group(*el.group, {s}, store);
          if (extended.empty()) out.push_back(s);
          else for (auto& r : extended) out.push_back(std::move(r));
        }
        sols = std::move(out);
        break;
      }
      case ElementKind::group: sols = join(sols, eval_group(*el.group, {Row{}}, store)); break;
      case ElementKind::filter: filters.push_back(el.expr.get()); break;
      case ElementKind::bind:
        for (auto& s : sols) {
          if (s.count(el.variable)) throw EvaluationError("BIND to already bound ?" + el.variable);
          if (Value v = eval(*el.expr, Context{&s, nullptr})) s.emplace(el.variable, *v);
        }
        break;
      case ElementKind::values: {
        std::vector<Row> rows;
        for (const auto& vr : el.values.rows) {
          Row r;
          for (std::size_t i = 0; i < vr.size(); ++i) {
            if (vr[i]) r.emplace(el.values.variables[i], normalize(*vr[i]));
          }
          rows.push_back(std::move(r));
        }
        sols = join(sols, rows);
        break;
      }
    }
  }
  if (filters.empty()) return sols;
  std::vector<Row> kept;
  for (auto& s : sols) {
    bool keep = true;
    for (const auto* f : filters) {
      auto b = effective_boolean(eval(*f, Context{&s, nullptr}));
      if (!b || !*b) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(std::move(s));
  }
  return kept;
}

struct OutputRow {
  Row bindings;
  std::vector<const Row*> group;
  bool grouped = false;
};

}  // namespace

ResultSet evaluate(const ParsedQuery& query, const TripleStore& store) {
  if (!query.analyzable || !query.model) {
    throw EvaluationError("query is outside the subset the fixture endpoint evaluates (" +
                          query.not_analyzable_reason + ")");
  }
  const QueryModel& m = *query.model;
  std::vector<Row> sols = eval_group(m.where, {Row{}}, store);

  ResultSet rs;
  if (m.form == QueryForm::ask) {
    rs.boolean = !sols.empty();
    return rs;
  }

  std::vector<OutputRow> outputs;
  if (m.is_aggregate_query()) {
    std::map<std::vector<Value>, std::vector<const Row*>,
             std::function<bool(const std::vector<Value>&, const std::vector<Value>&)>>
        groups([](const std::vector<Value>& a, const std::vector<Value>& b) {
          for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
            if (a[i] != b[i]) return a[i] < b[i];
          }
          return a.size() < b.size();
        });
    for (const auto& s : sols) {
      std::vector<Value> key;
      for (const auto& gc : m.group_by) key.push_back(eval(*gc.expr, Context{&s, nullptr}));
      groups[key].push_back(&s);
    }
    if (m.group_by.empty() && groups.empty()) groups[{}] = {};
    for (auto& [key, rows] : groups) {
      OutputRow out;
      out.grouped = true;
      out.group = rows;
      for (std::size_t i = 0; i < m.group_by.size(); ++i) {
        const auto& gc = m.group_by[i];
        std::string name = !gc.alias.empty() ? gc.alias
                           : gc.expr->kind == ExprKind::variable ? gc.expr->name
                                                                 : std::string();
        if (!name.empty() && key[i]) out.bindings.emplace(name, *key[i]);
      }
      outputs.push_back(std::move(out));
    }
  } else {
    for (const auto& s : sols) outputs.push_back(OutputRow{s, {}, false});
  }

  for (auto& out : outputs) {
    for (const auto& p : m.projections) {
      if (!p.expr) {
        if (out.grouped && !out.bindings.count(p.variable)) {
          throw EvaluationError("?" + p.variable + " is projected but not grouped");
        }
        continue;
      }
      Context ctx{&out.bindings, out.grouped ? &out.group : nullptr};
      if (Value v = eval(*p.expr, ctx)) out.bindings[p.variable] = *v;
    }
  }

  if (!m.order_by.empty()) {
    std::vector<std::vector<Value>> keys;
    keys.reserve(outputs.size());
    for (auto& out : outputs) {
      std::vector<Value> k;
      for (const auto& o : m.order_by) {
        k.push_back(eval(*o.expr, Context{&out.bindings, out.grouped ? &out.group : nullptr}));
      }
      keys.push_back(std::move(k));
    }
    std::vector<std::size_t> order(outputs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      for (std::size_t c = 0; c < m.order_by.size(); ++c) {
        int cmp = compare_values(keys[a][c], keys[b][c]);
        if (m.order_by[c].descending) cmp = -cmp;
        if (cmp != 0) return cmp < 0;
      }
      return false;
    });
    std::vector<OutputRow> sorted;
    sorted.reserve(outputs.size());
    for (auto i : order) sorted.push_back(std::move(outputs[i]));
    outputs = std::move(sorted);
  }

  rs.variables = query.projected_vars;
  for (const auto& out : outputs) {
    Row r;
    for (const auto& v : rs.variables) {
      if (auto it = out.bindings.find(v); it != out.bindings.end()) r.emplace(v, it->second);
    }
    rs.rows.push_back(std::move(r));
  }
  if (m.distinct || m.reduced) {
    std::set<Row> seen;
    std::vector<Row> unique;
    for (auto& r : rs.rows) {
      if (seen.insert(r).second) unique.push_back(std::move(r));
    }
    rs.rows = std::move(unique);
  }
  const auto offset = static_cast<std::size_t>(std::max(0LL, m.offset.value_or(0)));
  if (offset >= rs.rows.size()) {
    rs.rows.clear();
  } else if (offset > 0) {
    rs.rows.erase(rs.rows.begin(), rs.rows.begin() + static_cast<std::ptrdiff_t>(offset));
  }
  if (m.limit && static_cast<std::size_t>(std::max(0LL, *m.limit)) < rs.rows.size()) {
    rs.rows.resize(static_cast<std::size_t>(std::max(0LL, *m.limit)));
  }
  return rs;
}

}  // namespace compass::sparql
