#include "compass/schema/graph_schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "compass/common/digest.hpp"
#include "compass/common/error.hpp"
#include "compass/common/text.hpp"

namespace compass::schema {

using nlohmann::json;

namespace {

constexpr std::string_view kXsd = "http://www.w3.org/2001/XMLSchema#";
constexpr std::string_view kRdf = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
constexpr std::string_view kRdfs = "http://www.w3.org/2000/01/rdf-schema#";

bool is_local_name(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || c == '-' || u >= 0x80;
  });
}

// Expands "prefix:local", "<iri>" or an absolute IRI. Returns empty on failure.
std::string expand(const std::string& term, const std::map<std::string, std::string>& prefixes) {
  if (term.size() >= 2 && term.front() == '<' && term.back() == '>') {
    std::string inner = term.substr(1, term.size() - 2);
    return is_absolute_iri(inner) ? inner : std::string{};
  }
  const auto colon = term.find(':');
  if (colon != std::string::npos) {
    const std::string prefix = term.substr(0, colon);
    const std::string local = term.substr(colon + 1);
    if (auto it = prefixes.find(prefix); it != prefixes.end()) return it->second + local;
    const auto& standard = standard_prefixes();
    if (auto it = standard.find(prefix); it != standard.end()) return it->second + local;
  }
  return is_absolute_iri(term) ? term : std::string{};
}

const json* member(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::string required_string(const json& obj, const char* key, const std::string& where,
                            std::vector<std::string>& violations) {
  const json* v = member(obj, key);
  if (v == nullptr || !v->is_string()) {
    violations.push_back(where + ": missing or non-string field '" + key + "'");
    return {};
  }
  return v->get<std::string>();
}

}  // namespace

const std::map<std::string, std::string>& standard_prefixes() {
  static const std::map<std::string, std::string> prefixes = {
      {"owl", "http://www.w3.org/2002/07/owl#"},
      {"rdf", std::string(kRdf)},
      {"rdfs", std::string(kRdfs)},
      {"xsd", std::string(kXsd)},
  };
  return prefixes;
}

bool is_absolute_iri(std::string_view iri) {
  if (iri.empty()) return false;
  for (char c : iri) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '<' || c == '>' || c == '"' ||
        c == '{' || c == '}' || c == '|' || c == '\\' || c == '^' || c == '`') {
      return false;
    }
  }
  const auto colon = iri.find(':');
  if (colon == std::string_view::npos || colon == 0) return false;
  if (!std::isalpha(static_cast<unsigned char>(iri[0]))) return false;
  for (std::size_t i = 1; i < colon; ++i) {
    const char c = iri[i];
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') {
      return false;
    }
  }
  const std::string_view scheme = iri.substr(0, colon);
  const std::string_view rest = iri.substr(colon + 1);
  // Hierarchical IRIs need an authority; urn: is the one opaque scheme allowed.
  if (text::to_lower(scheme) == "urn") return rest.size() > 1;
  return rest.size() > 2 && rest.substr(0, 2) == "//";
}

bool is_datatype_iri(std::string_view iri) {
  return iri.substr(0, kXsd.size()) == kXsd || iri == std::string(kRdf) + "langString" ||
         iri == std::string(kRdfs) + "Literal";
}

const ClassDef* GraphSchema::find_class(std::string_view iri) const {
  auto it = std::lower_bound(classes.begin(), classes.end(), iri,
                             [](const ClassDef& c, std::string_view v) { return c.iri < v; });
  return it != classes.end() && it->iri == iri ? &*it : nullptr;
}

const PredicateDef* GraphSchema::find_predicate(std::string_view iri) const {
  auto it = std::lower_bound(predicates.begin(), predicates.end(), iri,
                             [](const PredicateDef& p, std::string_view v) { return p.iri < v; });
  return it != predicates.end() && it->iri == iri ? &*it : nullptr;
}

bool GraphSchema::in_namespace(std::string_view iri) const {
  return std::any_of(prefixes.begin(), prefixes.end(), [&](const auto& entry) {
    return iri.size() >= entry.second.size() &&
           iri.substr(0, entry.second.size()) == entry.second;
  });
}

std::string GraphSchema::compact(std::string_view iri) const {
  if (iri == kWildcard) return std::string(kWildcard);
  std::string best_prefix;
  std::size_t best_len = 0;
  auto consider = [&](const std::string& label, const std::string& ns) {
    if (ns.size() > best_len && iri.size() > ns.size() && iri.substr(0, ns.size()) == ns &&
        is_local_name(iri.substr(ns.size()))) {
      best_prefix = label;
      best_len = ns.size();
    }
  };
  for (const auto& [label, ns] : prefixes) consider(label, ns);
  for (const auto& [label, ns] : standard_prefixes()) {
    if (prefixes.find(label) == prefixes.end()) consider(label, ns);
  }
  if (best_len == 0) return "<" + std::string(iri) + ">";
  return best_prefix + ":" + std::string(iri.substr(best_len));
}

GraphSchema load_schema(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    const auto pos = position_of(document, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError("malformed schema document", pos.line, pos.column);
  }

  std::vector<std::string> violations;
  if (!doc.is_object()) {
    throw ValidationError("invalid schema document", {"top level must be a JSON object"});
  }

  GraphSchema schema;
  if (const json* v = member(doc, "version"); v == nullptr || !v->is_number_integer()) {
    violations.push_back("missing or non-integer field 'version'");
  } else if (v->get<int>() != kSchemaDocumentVersion) {
    violations.push_back("unsupported schema version " + std::to_string(v->get<int>()));
  }
  schema.use_case_id = required_string(doc, "use_case_id", "document", violations);
  if (const json* v = member(doc, "use_case_id"); v != nullptr && v->is_string() &&
                                                  schema.use_case_id.empty()) {
    violations.push_back("use_case_id must not be empty");
  }
  schema.label = required_string(doc, "label", "document", violations);

  if (const json* p = member(doc, "prefixes"); p == nullptr || !p->is_object()) {
    violations.push_back("missing or non-object field 'prefixes'");
  } else {
    for (const auto& [label, ns] : p->items()) {
      if (!ns.is_string()) {
        violations.push_back("prefix '" + label + "' must map to a string");
      } else if (!is_absolute_iri(ns.get<std::string>())) {
        violations.push_back("prefix '" + label + "' namespace '" + ns.get<std::string>() +
                             "' is not an absolute IRI");
      } else {
        schema.prefixes[label] = ns.get<std::string>();
      }
    }
  }

  auto expand_checked = [&](const std::string& raw, const std::string& where) {
    std::string iri = expand(raw, schema.prefixes);
    if (iri.empty()) {
      violations.push_back(where + ": IRI '" + raw + "' is not absolute after prefix expansion");
    }
    return iri;
  };

  if (const json* c = member(doc, "classes"); c == nullptr || !c->is_array()) {
    violations.push_back("missing or non-array field 'classes'");
  } else {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < c->size(); ++i) {
      const json& entry = (*c)[i];
      const std::string where = "classes[" + std::to_string(i) + "]";
      if (!entry.is_object()) {
        violations.push_back(where + ": must be an object");
        continue;
      }
      ClassDef def;
      const std::string raw = required_string(entry, "iri", where, violations);
      def.label = required_string(entry, "label", where, violations);
      if (const json* d = member(entry, "description"); d != nullptr) {
        if (d->is_string()) {
          def.description = d->get<std::string>();
        } else if (!d->is_null()) {
          violations.push_back(where + ": 'description' must be a string");
        }
      }
      if (raw.empty()) continue;
      def.iri = expand_checked(raw, where);
      if (def.iri.empty()) continue;
      if (!seen.insert(def.iri).second) {
        violations.push_back(where + ": duplicate class IRI <" + def.iri + ">");
        continue;
      }
      schema.classes.push_back(std::move(def));
    }
  }
  std::sort(schema.classes.begin(), schema.classes.end(),
            [](const ClassDef& a, const ClassDef& b) { return a.iri < b.iri; });

  std::set<std::string> class_iris;
  for (const auto& c : schema.classes) class_iris.insert(c.iri);

  if (const json* p = member(doc, "predicates"); p == nullptr || !p->is_array()) {
    violations.push_back("missing or non-array field 'predicates'");
  } else {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < p->size(); ++i) {
      const json& entry = (*p)[i];
      std::string where = "predicates[" + std::to_string(i) + "]";
      if (!entry.is_object()) {
        violations.push_back(where + ": must be an object");
        continue;
      }
      PredicateDef def;
      const std::string raw = required_string(entry, "iri", where, violations);
      if (!raw.empty()) where += " (" + raw + ")";
      def.label = required_string(entry, "label", where, violations);
      const std::string raw_domain = required_string(entry, "domain", where, violations);
      const std::string raw_range = required_string(entry, "range", where, violations);
      if (raw.empty()) continue;
      def.iri = expand_checked(raw, where);

      auto is_class = [&](const std::string& iri) { return class_iris.count(iri) > 0; };

      if (raw_domain == kWildcard) {
        def.domain = std::string(kWildcard);
      } else if (!raw_domain.empty()) {
        def.domain = expand(raw_domain, schema.prefixes);
        if (def.domain.empty() || !is_class(def.domain)) {
          violations.push_back(where + ": domain '" + raw_domain + "' is not a declared class");
        }
      }
      if (raw_range == kWildcard) {
        def.range = std::string(kWildcard);
      } else if (!raw_range.empty()) {
        def.range = expand(raw_range, schema.prefixes);
        if (def.range.empty() || (!is_class(def.range) && !is_datatype_iri(def.range))) {
          violations.push_back(where + ": range '" + raw_range +
                               "' is neither a declared class nor a literal datatype");
        }
      }
      if (def.iri.empty()) continue;
      if (!seen.insert(def.iri).second) {
        violations.push_back(where + ": duplicate predicate IRI <" + def.iri + ">");
        continue;
      }
      schema.predicates.push_back(std::move(def));
    }
  }
  std::sort(schema.predicates.begin(), schema.predicates.end(),
            [](const PredicateDef& a, const PredicateDef& b) { return a.iri < b.iri; });

  if (!violations.empty()) {
    throw ValidationError("invalid schema document '" + schema.use_case_id + "'",
                          std::move(violations));
  }
  schema.fingerprint = sha256_hex(canonical_serialize(schema));
  return schema;
}

GraphSchema load_schema_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open schema document '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_schema(buf.str());
}

json to_json(const GraphSchema& schema) {
  json classes = json::array();
  for (const auto& c : schema.classes) {
    json entry = {{"iri", c.iri}, {"label", c.label}};
    if (c.description) entry["description"] = *c.description;
    classes.push_back(std::move(entry));
  }
  json predicates = json::array();
  for (const auto& p : schema.predicates) {
    predicates.push_back(
        {{"iri", p.iri}, {"label", p.label}, {"domain", p.domain}, {"range", p.range}});
  }
  return {{"version", kSchemaDocumentVersion},
          {"use_case_id", schema.use_case_id},
          {"label", schema.label},
          {"prefixes", schema.prefixes},
          {"classes", std::move(classes)},
          {"predicates", std::move(predicates)}};
}

std::string canonical_serialize(const GraphSchema& schema) {
  GraphSchema sorted = schema;
  std::sort(sorted.classes.begin(), sorted.classes.end(),
            [](const ClassDef& a, const ClassDef& b) { return a.iri < b.iri; });
  std::sort(sorted.predicates.begin(), sorted.predicates.end(),
            [](const PredicateDef& a, const PredicateDef& b) { return a.iri < b.iri; });
  return canonical_json(to_json(sorted));
}

std::string schema_summary(const GraphSchema& schema, std::size_t budget) {
  if (budget < kMinSummaryBudget) {
    throw PreconditionError("schema summary budget must be at least " +
                            std::to_string(kMinSummaryBudget) + " characters");
  }
  std::vector<std::string> lines;
  lines.push_back("Graph schema '" + schema.use_case_id + "' (" + schema.label + ")");
  lines.push_back("Prefixes:");
  for (const auto& [label, ns] : schema.prefixes) {
    lines.push_back("PREFIX " + label + ": <" + ns + ">");
  }
  for (const auto& [label, ns] : standard_prefixes()) {
    if (schema.prefixes.find(label) == schema.prefixes.end()) {
      lines.push_back("PREFIX " + label + ": <" + ns + ">");
    }
  }
  lines.push_back("Classes:");
  for (const auto& c : schema.classes) {
    std::string line = "- " + schema.compact(c.iri) + " \"" + c.label + "\"";
    if (c.description && !c.description->empty()) line += ": " + *c.description;
    lines.push_back(std::move(line));
  }
  lines.push_back("Predicates (domain -> range):");
  for (const auto& p : schema.predicates) {
    lines.push_back("- " + schema.compact(p.iri) + " \"" + p.label + "\": " +
                    schema.compact(p.domain) + " -> " + schema.compact(p.range));
  }

  std::string full;
  for (const auto& line : lines) {
    full += line;
    full += '\n';
  }
  if (full.size() <= budget) return full;

  const std::size_t room = budget - kTruncationMarker.size() - 1;
  std::string out;
  for (const auto& line : lines) {
    if (out.size() + line.size() + 1 > room) {
      if (out.empty()) {
        out = std::string(text::utf8_prefix(line, room - 1)) + "\n";
      }
      break;
    }
    out += line;
    out += '\n';
  }
  out += kTruncationMarker;
  out += '\n';
  return out;
}

}  // namespace compass::schema
