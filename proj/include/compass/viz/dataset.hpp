#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "compass/common/error.hpp"
#include "compass/sparql/results.hpp"

namespace compass::viz {

enum class ColumnType { string, integer, decimal, boolean, date, iri };

std::string_view to_string(ColumnType type);
// Throws compass::Error("invalid_value") for unknown names.
ColumnType column_type_from_string(std::string_view name);
bool is_numeric(ColumnType type);

// std::monostate is the explicit missing marker. string, date and iri
// columns hold std::string; integer int64_t; decimal double; boolean bool.
using Cell = std::variant<std::monostate, std::string, std::int64_t, double, bool>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }
bool conforms(const Cell& cell, ColumnType type);
std::string cell_text(const Cell& cell);  // display form, "" when missing

struct Column {
  std::string name;
  ColumnType type = ColumnType::string;

  bool operator==(const Column&) const = default;
};

struct Provenance {
  std::string query_text;
  std::string endpoint;
  std::string retrieved_at;
  std::vector<std::string> warnings;

  bool operator==(const Provenance&) const = default;
};

struct Dataset {
  std::vector<Column> columns;
  std::vector<std::vector<Cell>> rows;
  Provenance provenance;

  std::optional<std::size_t> column_index(std::string_view name) const;
  // Throws ValidationError listing arity and type violations.
  void check_invariants() const;

  bool operator==(const Dataset&) const = default;
};

// One column per result variable in declared order; majority-vote type
// inference with string fallback on ties; unbound values become missing.
Dataset tabulate(const sparql::ResultSet& results, Provenance provenance = {});

nlohmann::json to_json(const Dataset& d);
Dataset dataset_from_json(const nlohmann::json& doc);

// RFC 4180: CRLF line ends, fields quoted when they contain ',', '"', CR or LF.
std::string to_csv(const Dataset& d);

}  // namespace compass::viz
