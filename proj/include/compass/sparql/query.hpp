#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "compass/common/error.hpp"
#include "compass/sparql/rdf_term.hpp"

namespace compass::sparql {

enum class QueryForm { select, ask };

std::string_view to_string(QueryForm form);

// Blank nodes in patterns behave as non-projectable variables.
struct Variable {
  std::string name;
  bool blank = false;

  bool operator==(const Variable&) const = default;
};

using PatternTerm = std::variant<Variable, RdfTerm>;

struct TriplePattern {
  PatternTerm subject;
  PatternTerm predicate;
  PatternTerm object;

  bool operator==(const TriplePattern&) const = default;
};

enum class ExprKind { variable, constant, unary, binary, call, aggregate, in_list };

struct Expression;
using ExprPtr = std::shared_ptr<const Expression>;

// `name` holds the variable name, operator symbol, upper-case builtin or
// aggregate name, or the function IRI when `iri_function` is set.
struct Expression {
  ExprKind kind = ExprKind::constant;
  std::string name;
  RdfTerm constant;
  std::vector<ExprPtr> args;
  bool distinct = false;
  bool star = false;
  bool negated = false;
  bool iri_function = false;
};

bool contains_aggregate(const Expression& expr);

struct GroupPattern;

struct ValuesBlock {
  std::vector<std::string> variables;
  std::vector<std::vector<std::optional<RdfTerm>>> rows;
};

enum class ElementKind { triple, optional, group, filter, bind, values };

struct PatternElement {
  ElementKind kind = ElementKind::triple;
  TriplePattern triple;
  std::shared_ptr<const GroupPattern> group;
  ExprPtr expr;
  std::string variable;
  ValuesBlock values;
};

struct GroupPattern {
  std::vector<PatternElement> elements;
};

struct Projection {
  std::string variable;
  ExprPtr expr;  // null for a plain variable
};

struct GroupCondition {
  ExprPtr expr;
  std::string alias;  // empty unless "(expr AS ?alias)"
};

struct OrderCondition {
  ExprPtr expr;
  bool descending = false;
};

struct QueryModel {
  QueryForm form = QueryForm::select;
  std::vector<std::pair<std::string, std::string>> prefixes;
  bool distinct = false;
  bool reduced = false;
  bool select_all = false;
  std::vector<Projection> projections;
  GroupPattern where;
  std::vector<GroupCondition> group_by;
  std::vector<OrderCondition> order_by;
  std::optional<long long> limit;
  std::optional<long long> offset;

  bool is_aggregate_query() const;
};

struct ParsedQuery {
  std::string text;
  QueryForm form = QueryForm::select;
  std::vector<std::string> projected_vars;
  std::set<std::string> referenced_iris;
  std::map<std::string, std::string> prefix_map;
  // False when the query is valid SPARQL outside the locally analyzable
  // subset; such queries are passed through and skip schema checks.
  bool analyzable = true;
  std::string not_analyzable_reason;
  std::shared_ptr<const QueryModel> model;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, std::size_t offset, TextPosition pos)
      : Error("sparql_syntax_error", message + " at offset " + std::to_string(offset) +
                                         " (line " + std::to_string(pos.line) + ", column " +
                                         std::to_string(pos.column) + ")"),
        offset_(offset),
        position_(pos) {}

  std::size_t offset() const noexcept { return offset_; }
  TextPosition position() const noexcept { return position_; }

 private:
  std::size_t offset_;
  TextPosition position_;
};

class UnsupportedFormError : public Error {
 public:
  explicit UnsupportedFormError(const std::string& form)
      : Error("unsupported_query_form",
              form + " queries are not supported; only SELECT and ASK are allowed"),
        form_(form) {}
  const std::string& form() const noexcept { return form_; }

 private:
  std::string form_;
};

ParsedQuery parse_query(std::string_view text);

// Normalized query text: full IRIs, explicit parentheses, one pattern per
// line. parse_query(serialize(q)) serializes back to the same text.
// Non-analyzable queries serialize to their original text.
std::string serialize(const ParsedQuery& query);
std::string serialize(const QueryModel& model);
std::string serialize(const Expression& expr);

}  // namespace compass::sparql
