#include "compass/sparql/rdf_term.hpp"

#include <cstdio>

namespace compass::sparql {

std::string escape_string_literal(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04X", static_cast<unsigned>(c));
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

std::string to_ntriples(const RdfTerm& term) {
  switch (term.kind) {
    case TermKind::iri: return "<" + term.value + ">";
    case TermKind::blank: return "_:" + term.value;
    case TermKind::literal: {
      std::string out = "\"" + escape_string_literal(term.value) + "\"";
      if (!term.lang.empty()) {
        out += "@" + term.lang;
      } else if (!term.datatype.empty()) {
        out += "^^<" + term.datatype + ">";
      }
      return out;
    }
  }
  return {};
}

bool is_integer_datatype(std::string_view dt) {
  static constexpr std::string_view kIntegerTypes[] = {
      "integer", "int",  "long", "short", "byte", "nonNegativeInteger", "positiveInteger",
      "nonPositiveInteger", "negativeInteger", "unsignedLong", "unsignedInt",
      "unsignedShort", "unsignedByte"};
  if (dt.substr(0, xsd::kNamespace.size()) != xsd::kNamespace) return false;
  const auto local = dt.substr(xsd::kNamespace.size());
  for (auto t : kIntegerTypes) {
    if (local == t) return true;
  }
  return false;
}

bool is_numeric_datatype(std::string_view dt) {
  return is_integer_datatype(dt) || dt == xsd::kDecimal || dt == xsd::kDouble ||
         dt == xsd::kFloat;
}

}  // namespace compass::sparql
