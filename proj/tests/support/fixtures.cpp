#include "fixtures.hpp"

#include <fstream>
#include <sstream>

namespace compass::fixtures {

std::string config_path(const std::string& relative) {
  return std::string(COMPASS_CONFIG_DIR) + "/" + relative;
}

std::string data_path(const std::string& relative) {
  return std::string(COMPASS_TEST_DATA_DIR) + "/" + relative;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::shared_ptr<schema::SchemaRegistry> shipped_schemas() {
  auto reg = std::make_shared<schema::SchemaRegistry>();
  for (const char* uc : kUseCases) {
    reg->load_file(config_path(std::string("schemas/") + uc + ".schema.json"));
  }
  return reg;
}

std::shared_ptr<catalog::Catalog> shipped_catalog(
    std::shared_ptr<const schema::SchemaRegistry> schemas) {
  auto cat = std::make_shared<catalog::Catalog>(schemas);
  for (const char* uc : kUseCases) {
    cat->put({uc, {}, {}, uc},
             catalog::load_catalog_file(config_path(std::string("catalogs/") + uc + ".catalog.json")));
  }
  return cat;
}

std::shared_ptr<const sparql::TripleStore> shipped_graph(const std::string& use_case_id) {
  return std::make_shared<const sparql::TripleStore>(
      sparql::load_ntriples_file(config_path("graphs/" + use_case_id + ".nt")));
}

std::unique_ptr<sparql::FixtureEndpoint> start_shipped_endpoint() {
  auto ep = std::make_unique<sparql::FixtureEndpoint>();
  for (const char* uc : kUseCases) ep->mount(std::string("/") + uc + "/sparql", shipped_graph(uc));
  ep->start();
  return ep;
}

}  // namespace compass::fixtures
