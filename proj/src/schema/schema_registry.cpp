#include "compass/schema/schema_registry.hpp"

#include <mutex>

#include "compass/common/error.hpp"

namespace compass::schema {

std::shared_ptr<const GraphSchema> SchemaRegistry::load(std::string_view document) {
  return add(load_schema(document));
}

std::shared_ptr<const GraphSchema> SchemaRegistry::load_file(const std::string& path) {
  return add(load_schema_file(path));
}

std::shared_ptr<const GraphSchema> SchemaRegistry::add(GraphSchema schema) {
  auto shared = std::make_shared<const GraphSchema>(std::move(schema));
  std::unique_lock lock(mutex_);
  schemas_[shared->use_case_id] = shared;
  return shared;
}

std::shared_ptr<const GraphSchema> SchemaRegistry::find(const std::string& use_case_id) const {
  std::shared_lock lock(mutex_);
  auto it = schemas_.find(use_case_id);
  return it == schemas_.end() ? nullptr : it->second;
}

std::shared_ptr<const GraphSchema> SchemaRegistry::get(const std::string& use_case_id) const {
  auto schema = find(use_case_id);
  if (!schema) throw NotFoundError("unknown use case '" + use_case_id + "'");
  return schema;
}

std::vector<UseCaseEntry> SchemaRegistry::list_use_cases() const {
  std::shared_lock lock(mutex_);
  std::vector<UseCaseEntry> out;
  out.reserve(schemas_.size());
  for (const auto& [id, schema] : schemas_) {
    out.push_back({id, schema->label, schema->fingerprint});
  }
  return out;
}

}  // namespace compass::schema
