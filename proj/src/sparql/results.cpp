#include "compass/sparql/results.hpp"

#include <set>

namespace compass::sparql {

using nlohmann::json;

namespace {

const json& require(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DecodeError(path + "/" + key, "missing member");
  return *it;
}

std::string require_string(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw DecodeError(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

RdfTerm decode_term(const json& binding, const std::string& path) {
  if (!binding.is_object()) throw DecodeError(path, "binding must be an object");
  const std::string type = require_string(binding, "type", path);
  const std::string value = require_string(binding, "value", path);
  if (type == "uri") return RdfTerm::iri(value);
  if (type == "bnode") return RdfTerm::blank(value);
  if (type == "literal" || type == "typed-literal") {
    std::string datatype;
    std::string lang;
    if (auto it = binding.find("datatype"); it != binding.end()) {
      if (!it->is_string()) throw DecodeError(path + "/datatype", "expected a string");
      datatype = it->get<std::string>();
    }
    if (auto it = binding.find("xml:lang"); it != binding.end()) {
      if (!it->is_string()) throw DecodeError(path + "/xml:lang", "expected a string");
      lang = it->get<std::string>();
    }
    if (!lang.empty() && datatype == kRdfLangString) datatype.clear();
    if (type == "typed-literal" && datatype.empty()) {
      throw DecodeError(path + "/datatype", "typed-literal without datatype");
    }
    return RdfTerm::literal(value, datatype, lang);
  }
  throw DecodeError(path + "/type", "unknown binding type '" + type + "'");
}

json encode_term(const RdfTerm& term) {
  switch (term.kind) {
    case TermKind::iri: return {{"type", "uri"}, {"value", term.value}};
    case TermKind::blank: return {{"type", "bnode"}, {"value", term.value}};
    case TermKind::literal: {
      json out = {{"type", "literal"}, {"value", term.value}};
      if (!term.lang.empty()) {
        out["xml:lang"] = term.lang;
      } else if (!term.datatype.empty()) {
        out["datatype"] = term.datatype;
      }
      return out;
    }
  }
  return {};
}

}  // namespace

ResultSet results_from_json(const json& doc) {
  if (!doc.is_object()) throw DecodeError("", "document must be a JSON object");
  const json& head = require(doc, "head", "");
  if (!head.is_object()) throw DecodeError("/head", "expected an object");

  ResultSet rs;
  if (auto it = doc.find("boolean"); it != doc.end()) {
    if (!it->is_boolean()) throw DecodeError("/boolean", "expected true or false");
    rs.boolean = it->get<bool>();
    return rs;
  }

  std::set<std::string> declared;
  if (auto it = head.find("vars"); it != head.end()) {
    if (!it->is_array()) throw DecodeError("/head/vars", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& v = (*it)[i];
      if (!v.is_string()) {
        throw DecodeError("/head/vars/" + std::to_string(i), "expected a string");
      }
      rs.variables.push_back(v.get<std::string>());
      declared.insert(rs.variables.back());
    }
  }

  const json& results = require(doc, "results", "");
  if (!results.is_object()) throw DecodeError("/results", "expected an object");
  const json& bindings = require(results, "bindings", "/results");
  if (!bindings.is_array()) throw DecodeError("/results/bindings", "expected an array");
  rs.rows.reserve(bindings.size());
  for (std::size_t i = 0; i < bindings.size(); ++i) {
    const std::string path = "/results/bindings/" + std::to_string(i);
    const json& row_json = bindings[i];
    if (!row_json.is_object()) throw DecodeError(path, "expected an object");
    Row row;
    for (const auto& [var, binding] : row_json.items()) {
      if (declared.find(var) == declared.end()) {
        throw DecodeError(path + "/" + var, "variable not declared in head");
      }
      row.emplace(var, decode_term(binding, path + "/" + var));
    }
    rs.rows.push_back(std::move(row));
  }
  return rs;
}

ResultSet decode_results(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw DecodeError("", std::string("invalid JSON (byte ") + std::to_string(e.byte) + ")");
  }
  return results_from_json(doc);
}

json results_to_json(const ResultSet& rs) {
  if (rs.boolean) return {{"head", json::object()}, {"boolean", *rs.boolean}};
  json bindings = json::array();
  for (const auto& row : rs.rows) {
    json r = json::object();
    for (const auto& [var, term] : row) r[var] = encode_term(term);
    bindings.push_back(std::move(r));
  }
  return {{"head", {{"vars", rs.variables}}}, {"results", {{"bindings", std::move(bindings)}}}};
}

std::string encode_results(const ResultSet& rs) { return results_to_json(rs).dump(); }

}  // namespace compass::sparql
