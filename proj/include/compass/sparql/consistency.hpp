#pragma once

#include <string>
#include <vector>

#include "compass/schema/graph_schema.hpp"
#include "compass/sparql/query.hpp"

namespace compass::sparql {

struct Inconsistency {
  std::string iri;
  std::string message;

  bool operator==(const Inconsistency&) const = default;
};

// One entry per referenced IRI that lies under a schema namespace but is
// neither a declared class nor a declared predicate. Non-analyzable queries
// yield an empty list.
std::vector<Inconsistency> check_schema_consistency(const ParsedQuery& query,
                                                    const schema::GraphSchema& schema);

}  // namespace compass::sparql
