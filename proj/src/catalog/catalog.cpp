#include "compass/catalog/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "compass/sparql/consistency.hpp"

namespace compass::catalog {

using nlohmann::json;

json to_json(const CuratedQuestion& q) {
  return {{"id", q.id},
          {"use_case_id", q.use_case_id},
          {"index", q.index},
          {"question_text", q.question_text},
          {"sparql_text", q.sparql_text},
          {"chart", viz::to_json(q.chart)},
          {"interpretation", q.interpretation},
          {"explanation", q.explanation},
          {"provenance_note", q.provenance_note}};
}

CuratedQuestion question_from_json(const json& doc) {
  std::vector<std::string> v;
  CuratedQuestion q;
  auto str = [&](const char* key, std::string& out, bool required = true) {
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_string()) {
      if (required) v.push_back(std::string("missing or non-string field '") + key + "'");
      return;
    }
    out = it->get<std::string>();
  };
  if (!doc.is_object()) throw ValidationError("invalid curated question", {"record must be an object"});
  str("id", q.id);
  str("use_case_id", q.use_case_id);
  str("question_text", q.question_text);
  str("sparql_text", q.sparql_text);
  str("interpretation", q.interpretation);
  str("explanation", q.explanation);
  str("provenance_note", q.provenance_note);
  if (auto it = doc.find("index"); it == doc.end() || !it->is_number_integer()) {
    v.push_back("missing or non-integer field 'index'");
  } else {
    q.index = it->get<int>();
  }
  if (auto it = doc.find("chart"); it == doc.end()) {
    v.push_back("missing field 'chart'");
  } else {
    try {
      q.chart = viz::chart_from_json(*it);
    } catch (const ValidationError& e) {
      for (const auto& x : e.violations()) v.push_back("chart: " + x);
    }
  }
  if (!v.empty()) {
    throw ValidationError("invalid curated question '" + q.id + "'", std::move(v));
  }
  return q;
}

std::vector<CuratedQuestion> load_catalog(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    const auto pos = position_of(document, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError("malformed catalog document", pos.line, pos.column);
  }
  if (!doc.is_array()) throw ValidationError("invalid catalog document", {"top level must be an array"});
  std::vector<CuratedQuestion> out;
  std::vector<std::string> violations;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    try {
      out.push_back(question_from_json(doc[i]));
    } catch (const ValidationError& e) {
      for (const auto& x : e.violations()) violations.push_back("[" + std::to_string(i) + "] " + x);
    }
  }
  if (!violations.empty()) throw ValidationError("invalid catalog document", std::move(violations));
  std::sort(out.begin(), out.end(),
            [](const CuratedQuestion& a, const CuratedQuestion& b) { return a.index < b.index; });
  return out;
}

std::vector<CuratedQuestion> load_catalog_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open catalog document '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_catalog(buf.str());
}

std::vector<Violation> validate_questions(const std::vector<CuratedQuestion>& questions,
                                          const schema::GraphSchema& schema) {
  std::vector<Violation> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto& q = questions[i];
    if (!ids.insert(q.id).second) out.push_back({q.id, {}, "duplicate question id"});
    if (q.index != static_cast<int>(i) + 1) {
      out.push_back({q.id, {}, "index " + std::to_string(q.index) + " breaks the 1.." +
                                   std::to_string(questions.size()) + " sequence"});
    }
    if (q.use_case_id != schema.use_case_id) {
      out.push_back({q.id, {}, "belongs to use case '" + q.use_case_id + "'"});
    }
    try {
      const auto parsed = sparql::parse_query(q.sparql_text);
      if (!parsed.analyzable) {
        out.push_back({q.id, {}, "query cannot be checked locally: " + parsed.not_analyzable_reason});
        continue;
      }
      for (const auto& inc : sparql::check_schema_consistency(parsed, schema)) {
        out.push_back({q.id, inc.iri, inc.message});
      }
    } catch (const Error& e) {
      out.push_back({q.id, {}, e.what()});
    }
  }
  return out;
}

Catalog::Catalog(std::shared_ptr<const schema::SchemaRegistry> schemas)
    : schemas_(std::move(schemas)), state_(std::make_shared<State>()) {}

void Catalog::put(UseCaseDescriptor descriptor, std::vector<CuratedQuestion> questions) {
  const auto schema = schemas_->get(descriptor.use_case_id);
  if (descriptor.schema_ref.empty()) descriptor.schema_ref = schema->fingerprint;
  if (descriptor.schema_ref != schema->fingerprint) {
    throw PreconditionError("schema_ref of use case '" + descriptor.use_case_id +
                            "' does not match the registered schema");
  }
  if (descriptor.label.empty()) descriptor.label = schema->label;
  auto e = std::make_shared<Entry>(Entry{std::move(descriptor), std::move(questions), now_utc()});
  std::lock_guard lock(mutex_);
  auto next = std::make_shared<State>(*state_);
  (*next)[e->descriptor.use_case_id] = std::move(e);
  state_ = std::move(next);
}

std::shared_ptr<const Catalog::Entry> Catalog::entry(const std::string& use_case_id) const {
  std::shared_ptr<const State> s;
  {
    std::lock_guard lock(mutex_);
    s = state_;
  }
  auto it = s->find(use_case_id);
  if (it == s->end()) throw NotFoundError("unknown use case '" + use_case_id + "'");
  return it->second;
}

std::vector<UseCaseDescriptor> Catalog::list_use_cases() const {
  std::shared_ptr<const State> s;
  {
    std::lock_guard lock(mutex_);
    s = state_;
  }
  std::vector<UseCaseDescriptor> out;
  for (const auto& [id, e] : *s) out.push_back(e->descriptor);
  return out;
}

UseCaseDescriptor Catalog::descriptor(const std::string& use_case_id) const {
  return entry(use_case_id)->descriptor;
}

std::vector<CuratedQuestion> Catalog::list_questions(const std::string& use_case_id) const {
  return entry(use_case_id)->questions;
}

CuratedQuestion Catalog::get_question(const std::string& use_case_id, int index) const {
  const auto e = entry(use_case_id);
  if (index < 1 || index > static_cast<int>(e->questions.size())) {
    throw NotFoundError("use case '" + use_case_id + "' has no curated question " +
                        std::to_string(index) + " (valid: 1.." +
                        std::to_string(e->questions.size()) + ")");
  }
  return e->questions[static_cast<std::size_t>(index - 1)];
}

std::vector<Violation> Catalog::validate_catalog(const std::string& use_case_id) const {
  const auto e = entry(use_case_id);
  return validate_questions(e->questions, *schemas_->get(use_case_id));
}

Timestamp Catalog::last_reload(const std::string& use_case_id) const {
  return entry(use_case_id)->loaded_at;
}

}  // namespace compass::catalog
