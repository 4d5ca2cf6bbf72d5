#pragma once

#include <memory>
#include <string>

#include "compass/catalog/catalog.hpp"
#include "compass/schema/schema_registry.hpp"
#include "compass/sparql/triple_store.hpp"

namespace compass::fixtures {

std::string config_path(const std::string& relative);
std::string data_path(const std::string& relative);
std::string read_file(const std::string& path);

inline const char* const kUseCases[] = {"kg-empire", "nlp4re-id-card"};

std::shared_ptr<schema::SchemaRegistry> shipped_schemas();
std::shared_ptr<catalog::Catalog> shipped_catalog(std::shared_ptr<const schema::SchemaRegistry> schemas);
std::shared_ptr<const sparql::TripleStore> shipped_graph(const std::string& use_case_id);

// Fixture endpoint serving both shipped graphs at "/<use case>/sparql".
std::unique_ptr<sparql::FixtureEndpoint> start_shipped_endpoint();

}  // namespace compass::fixtures
