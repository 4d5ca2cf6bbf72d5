#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "compass/common/time.hpp"
#include "compass/schema/schema_registry.hpp"
#include "compass/viz/chart.hpp"

namespace compass::catalog {

struct CuratedQuestion {
  std::string id;
  std::string use_case_id;
  int index = 0;  // 1-based
  std::string question_text;
  std::string sparql_text;
  viz::ChartSpec chart;
  std::string interpretation;
  std::string explanation;
  std::string provenance_note;

  bool operator==(const CuratedQuestion&) const = default;
};

struct UseCaseDescriptor {
  std::string use_case_id;
  std::string label;
  std::string schema_ref;    // fingerprint of the bound schema
  std::string endpoint_ref;  // key into the endpoint configuration

  bool operator==(const UseCaseDescriptor&) const = default;
};

struct Violation {
  std::string question_id;
  std::string iri;  // empty unless the violation is about one IRI
  std::string message;

  bool operator==(const Violation&) const = default;
};

nlohmann::json to_json(const CuratedQuestion& q);
CuratedQuestion question_from_json(const nlohmann::json& doc);

// A catalog document is a JSON array of question records.
std::vector<CuratedQuestion> load_catalog(std::string_view document);
std::vector<CuratedQuestion> load_catalog_file(const std::string& path);

// Parse and schema-consistency checks for a list of questions; also checks
// that indices run 1..n and ids are unique.
std::vector<Violation> validate_questions(const std::vector<CuratedQuestion>& questions,
                                          const schema::GraphSchema& schema);

// Read-only after load; reloads swap the whole use case atomically.
class Catalog {
 public:
  explicit Catalog(std::shared_ptr<const schema::SchemaRegistry> schemas);

  // Registers or replaces a use case. Throws NotFoundError when the schema
  // is not registered and PreconditionError when schema_ref does not match
  // the registered fingerprint.
  void put(UseCaseDescriptor descriptor, std::vector<CuratedQuestion> questions);

  std::vector<UseCaseDescriptor> list_use_cases() const;
  UseCaseDescriptor descriptor(const std::string& use_case_id) const;
  std::vector<CuratedQuestion> list_questions(const std::string& use_case_id) const;
  CuratedQuestion get_question(const std::string& use_case_id, int index) const;
  std::vector<Violation> validate_catalog(const std::string& use_case_id) const;
  Timestamp last_reload(const std::string& use_case_id) const;

 private:
  struct Entry {
    UseCaseDescriptor descriptor;
    std::vector<CuratedQuestion> questions;
    Timestamp loaded_at;
  };
  using State = std::map<std::string, std::shared_ptr<const Entry>>;

  std::shared_ptr<const Entry> entry(const std::string& use_case_id) const;

  std::shared_ptr<const schema::SchemaRegistry> schemas_;
  mutable std::mutex mutex_;
  std::shared_ptr<const State> state_;
};

}  // namespace compass::catalog
