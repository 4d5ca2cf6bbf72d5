#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace compass::sparql {

namespace xsd {
inline constexpr std::string_view kNamespace = "http://www.w3.org/2001/XMLSchema#";
inline const std::string kString = "http://www.w3.org/2001/XMLSchema#string";
inline const std::string kInteger = "http://www.w3.org/2001/XMLSchema#integer";
inline const std::string kDecimal = "http://www.w3.org/2001/XMLSchema#decimal";
inline const std::string kDouble = "http://www.w3.org/2001/XMLSchema#double";
inline const std::string kFloat = "http://www.w3.org/2001/XMLSchema#float";
inline const std::string kBoolean = "http://www.w3.org/2001/XMLSchema#boolean";
inline const std::string kDate = "http://www.w3.org/2001/XMLSchema#date";
inline const std::string kDateTime = "http://www.w3.org/2001/XMLSchema#dateTime";
inline const std::string kGYear = "http://www.w3.org/2001/XMLSchema#gYear";
}  // namespace xsd

inline const std::string kRdfType = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
inline const std::string kRdfLangString =
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";

enum class TermKind { iri, literal, blank };

// An RDF term as it appears in result bindings and in the fixture store.
// Simple literals carry an empty datatype; language-tagged literals carry
// the tag in `lang` and an empty datatype.
struct RdfTerm {
  TermKind kind = TermKind::literal;
  std::string value;
  std::string datatype;
  std::string lang;

  static RdfTerm iri(std::string v) { return {TermKind::iri, std::move(v), {}, {}}; }
  static RdfTerm literal(std::string v, std::string datatype = {}, std::string lang = {}) {
    return {TermKind::literal, std::move(v), std::move(datatype), std::move(lang)};
  }
  static RdfTerm blank(std::string label) { return {TermKind::blank, std::move(label), {}, {}}; }
  static RdfTerm integer(long long v) { return literal(std::to_string(v), xsd::kInteger); }
  static RdfTerm boolean(bool v) { return literal(v ? "true" : "false", xsd::kBoolean); }

  bool is_iri() const { return kind == TermKind::iri; }
  bool is_literal() const { return kind == TermKind::literal; }
  bool is_blank() const { return kind == TermKind::blank; }

  bool operator==(const RdfTerm&) const = default;
  auto operator<=>(const RdfTerm&) const = default;
};

// N-Triples style rendering, used in diagnostics and canonical output.
std::string to_ntriples(const RdfTerm& term);
std::string escape_string_literal(std::string_view s);

bool is_numeric_datatype(std::string_view datatype);
bool is_integer_datatype(std::string_view datatype);

}  // namespace compass::sparql
