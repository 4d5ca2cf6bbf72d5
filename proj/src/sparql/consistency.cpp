#include "compass/sparql/consistency.hpp"

namespace compass::sparql {

std::vector<Inconsistency> check_schema_consistency(const ParsedQuery& query,
                                                    const schema::GraphSchema& schema) {
  std::vector<Inconsistency> out;
  if (!query.analyzable) return out;
  for (const auto& iri : query.referenced_iris) {
    if (!schema.in_namespace(iri) || schema.declares(iri)) continue;
    out.push_back({iri, "IRI " + schema.compact(iri) + " is not declared in the " +
                            schema.use_case_id + " schema"});
  }
  return out;
}

}  // namespace compass::sparql
