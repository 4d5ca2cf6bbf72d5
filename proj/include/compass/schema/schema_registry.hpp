#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "compass/schema/graph_schema.hpp"

namespace compass::schema {

struct UseCaseEntry {
  std::string use_case_id;
  std::string label;
  std::string fingerprint;
};

// Read-mostly registry. A schema becomes visible only after full validation.
class SchemaRegistry {
 public:
  std::shared_ptr<const GraphSchema> load(std::string_view document);
  std::shared_ptr<const GraphSchema> load_file(const std::string& path);
  std::shared_ptr<const GraphSchema> add(GraphSchema schema);

  std::shared_ptr<const GraphSchema> find(const std::string& use_case_id) const;
  // Throws NotFoundError for unknown ids.
  std::shared_ptr<const GraphSchema> get(const std::string& use_case_id) const;

  std::vector<UseCaseEntry> list_use_cases() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const GraphSchema>> schemas_;
};

}  // namespace compass::schema
