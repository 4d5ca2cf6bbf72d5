#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace compass::schema {

// Domain/range marker for loosely typed predicates.
inline constexpr std::string_view kWildcard = "*";
inline constexpr int kSchemaDocumentVersion = 1;
inline constexpr std::size_t kMinSummaryBudget = 200;
inline constexpr std::string_view kTruncationMarker = "[... schema truncated]";

struct ClassDef {
  std::string iri;
  std::string label;
  std::optional<std::string> description;

  bool operator==(const ClassDef&) const = default;
};

struct PredicateDef {
  std::string iri;
  std::string label;
  std::string domain;  // class IRI or kWildcard
  std::string range;   // class IRI, datatype IRI or kWildcard

  bool operator==(const PredicateDef&) const = default;
};

struct GraphSchema {
  std::string use_case_id;
  std::string label;
  std::map<std::string, std::string> prefixes;  // label -> namespace IRI
  std::vector<ClassDef> classes;                // sorted by IRI
  std::vector<PredicateDef> predicates;         // sorted by IRI
  std::string fingerprint;                      // sha256 of canonical_serialize()

  const ClassDef* find_class(std::string_view iri) const;
  const PredicateDef* find_predicate(std::string_view iri) const;
  bool declares(std::string_view iri) const {
    return find_class(iri) != nullptr || find_predicate(iri) != nullptr;
  }
  // True when `iri` lies under one of the declared prefix namespaces.
  bool in_namespace(std::string_view iri) const;
  // Shortest prefixed form using declared and standard prefixes, or <iri>.
  std::string compact(std::string_view iri) const;

  bool operator==(const GraphSchema&) const = default;
};

// Prefixes every schema and query may rely on without declaring them.
const std::map<std::string, std::string>& standard_prefixes();

bool is_absolute_iri(std::string_view iri);
bool is_datatype_iri(std::string_view iri);

// Parses and validates a schema document. Malformed JSON raises ParseError;
// structural or invariant problems raise ValidationError with every violation.
GraphSchema load_schema(std::string_view document);
GraphSchema load_schema_file(const std::string& path);

nlohmann::json to_json(const GraphSchema& schema);
// Deterministic document: expanded IRIs, classes/predicates sorted by IRI.
std::string canonical_serialize(const GraphSchema& schema);

// Deterministic prompt fragment, never longer than `budget` bytes.
std::string schema_summary(const GraphSchema& schema, std::size_t budget);

}  // namespace compass::schema
