#include <regex>
#include <sstream>

#include "compass/sparql/query.hpp"

namespace compass::sparql {

namespace {

bool lexical_matches(const RdfTerm& t) {
  static const std::regex integer_re("[0-9]+");
  static const std::regex decimal_re("[0-9]*\\.[0-9]+");
  static const std::regex double_re("([0-9]+(\\.[0-9]+)?|\\.[0-9]+)[eE][+-]?[0-9]+");
  if (t.datatype == xsd::kInteger) return std::regex_match(t.value, integer_re);
  if (t.datatype == xsd::kDecimal) return std::regex_match(t.value, decimal_re);
  if (t.datatype == xsd::kDouble) return std::regex_match(t.value, double_re);
  if (t.datatype == xsd::kBoolean) return t.value == "true" || t.value == "false";
  return false;
}

std::string term_text(const RdfTerm& t) {
  switch (t.kind) {
    case TermKind::iri: return "<" + t.value + ">";
    case TermKind::blank: return "_:" + t.value;
    case TermKind::literal: break;
  }
  if (lexical_matches(t)) return t.value;
  std::string out = "\"" + escape_string_literal(t.value) + "\"";
  if (!t.lang.empty()) return out + "@" + t.lang;
  if (!t.datatype.empty()) return out + "^^<" + t.datatype + ">";
  return out;
}

std::string pattern_term_text(const PatternTerm& t) {
  if (const auto* v = std::get_if<Variable>(&t)) {
    return (v->blank ? "_:" : "?") + v->name;
  }
  return term_text(std::get<RdfTerm>(t));
}

void write_group(std::ostringstream& out, const GroupPattern& g, int depth) {
  const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  out << "{\n";
  for (const auto& el : g.elements) {
    out << indent << "  ";
    switch (el.kind) {
      case ElementKind::triple:
        out << pattern_term_text(el.triple.subject) << ' '
            << pattern_term_text(el.triple.predicate) << ' '
            << pattern_term_text(el.triple.object) << " .";
        break;
      case ElementKind::optional:
        out << "OPTIONAL ";
        write_group(out, *el.group, depth + 1);
        break;
      case ElementKind::group: write_group(out, *el.group, depth + 1); break;
      case ElementKind::filter: out << "FILTER(" << serialize(*el.expr) << ")"; break;
      case ElementKind::bind:
        out << "BIND(" << serialize(*el.expr) << " AS ?" << el.variable << ")";
        break;
      case ElementKind::values: {
        out << "VALUES (";
        for (std::size_t i = 0; i < el.values.variables.size(); ++i) {
          out << (i ? " " : "") << '?' << el.values.variables[i];
        }
        out << ") {";
        for (const auto& row : el.values.rows) {
          out << " (";
          for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? " " : "") << (row[i] ? term_text(*row[i]) : "UNDEF");
          }
          out << ")";
        }
        out << " }";
        break;
      }
    }
    out << '\n';
  }
  out << indent << "}";
}

}  // namespace

std::string serialize(const Expression& e) {
  switch (e.kind) {
    case ExprKind::variable: return "?" + e.name;
    case ExprKind::constant: return term_text(e.constant);
    case ExprKind::unary: return e.name + "(" + serialize(*e.args.at(0)) + ")";
    case ExprKind::binary:
      return "(" + serialize(*e.args.at(0)) + " " + e.name + " " + serialize(*e.args.at(1)) + ")";
    case ExprKind::call: {
      std::string out = e.iri_function ? "<" + e.name + ">(" : e.name + "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        out += serialize(*e.args[i]);
      }
      return out + ")";
    }
    case ExprKind::aggregate: {
      std::string out = e.name + "(";
      if (e.distinct) out += "DISTINCT ";
      out += e.star ? "*" : serialize(*e.args.at(0));
      return out + ")";
    }
    case ExprKind::in_list: {
      std::string out = "(" + serialize(*e.args.at(0)) + (e.negated ? " NOT IN (" : " IN (");
      for (std::size_t i = 1; i < e.args.size(); ++i) {
        if (i > 1) out += ", ";
        out += serialize(*e.args[i]);
      }
      return out + "))";
    }
  }
  return {};
}

std::string serialize(const QueryModel& m) {
  std::ostringstream out;
  for (const auto& [label, ns] : m.prefixes) out << "PREFIX " << label << ": <" << ns << ">\n";
  if (m.form == QueryForm::ask) {
    out << "ASK\n";
  } else {
    out << "SELECT";
    if (m.distinct) out << " DISTINCT";
    if (m.reduced) out << " REDUCED";
    if (m.select_all) out << " *";
    for (const auto& p : m.projections) {
      if (p.expr) {
        out << " (" << serialize(*p.expr) << " AS ?" << p.variable << ")";
      } else {
        out << " ?" << p.variable;
      }
    }
    out << "\n";
  }
  out << "WHERE ";
  write_group(out, m.where, 0);
  out << "\n";
  if (!m.group_by.empty()) {
    out << "GROUP BY";
    for (const auto& g : m.group_by) {
      if (g.expr->kind == ExprKind::variable && g.alias.empty()) {
        out << " ?" << g.expr->name;
      } else if (g.alias.empty()) {
        out << " (" << serialize(*g.expr) << ")";
      } else {
        out << " (" << serialize(*g.expr) << " AS ?" << g.alias << ")";
      }
    }
    out << "\n";
  }
  if (!m.order_by.empty()) {
    out << "ORDER BY";
    for (const auto& o : m.order_by) {
      out << (o.descending ? " DESC(" : " ASC(") << serialize(*o.expr) << ")";
    }
    out << "\n";
  }
  if (m.limit) out << "LIMIT " << *m.limit << "\n";
  if (m.offset) out << "OFFSET " << *m.offset << "\n";
  return out.str();
}

std::string serialize(const ParsedQuery& q) {
  if (!q.analyzable || !q.model) return q.text;
  return serialize(*q.model);
}

}  // namespace compass::sparql
