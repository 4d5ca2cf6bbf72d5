#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "compass/common/error.hpp"
#include "compass/sparql/rdf_term.hpp"

namespace compass::sparql {

inline constexpr std::string_view kResultsMediaType = "application/sparql-results+json";

// A result row. Variables absent from the map are unbound.
using Row = std::map<std::string, RdfTerm>;

struct ResultSet {
  std::vector<std::string> variables;
  std::vector<Row> rows;
  std::optional<bool> boolean;  // set for ASK results

  bool is_boolean() const { return boolean.has_value(); }
  bool operator==(const ResultSet&) const = default;
};

class DecodeError : public Error {
 public:
  DecodeError(const std::string& path, const std::string& message)
      : Error("decode_error", "malformed SPARQL results at " + path + ": " + message),
        path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Decodes a SPARQL 1.1 Query Results JSON document.
ResultSet decode_results(std::string_view document);
nlohmann::json results_to_json(const ResultSet& results);
std::string encode_results(const ResultSet& results);
// Inverse of results_to_json; errors are reported as DecodeError.
ResultSet results_from_json(const nlohmann::json& document);

}  // namespace compass::sparql
