#include "compass/viz/dataset.hpp"

#include <charconv>
#include <cmath>
#include <map>

namespace compass::viz {

using nlohmann::json;
namespace xsd = sparql::xsd;

std::string_view to_string(ColumnType type) {
  switch (type) {
    case ColumnType::string: return "string";
    case ColumnType::integer: return "integer";
    case ColumnType::decimal: return "decimal";
    case ColumnType::boolean: return "boolean";
    case ColumnType::date: return "date";
    case ColumnType::iri: return "iri";
  }
  return "string";
}

ColumnType column_type_from_string(std::string_view name) {
  static const std::map<std::string_view, ColumnType> names = {
      {"string", ColumnType::string},   {"integer", ColumnType::integer},
      {"decimal", ColumnType::decimal}, {"boolean", ColumnType::boolean},
      {"date", ColumnType::date},       {"iri", ColumnType::iri}};
  auto it = names.find(name);
  if (it == names.end()) throw Error("invalid_value", "unknown column type '" + std::string(name) + "'");
  return it->second;
}

bool is_numeric(ColumnType type) { return type == ColumnType::integer || type == ColumnType::decimal; }

bool conforms(const Cell& cell, ColumnType type) {
  if (is_missing(cell)) return true;
  switch (type) {
    case ColumnType::string:
    case ColumnType::date:
    case ColumnType::iri: return std::holds_alternative<std::string>(cell);
    case ColumnType::integer: return std::holds_alternative<std::int64_t>(cell);
    case ColumnType::decimal: return std::holds_alternative<double>(cell);
    case ColumnType::boolean: return std::holds_alternative<bool>(cell);
  }
  return false;
}

std::string format_number(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

std::string cell_text(const Cell& cell) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return {};
        else if constexpr (std::is_same_v<T, std::string>) return v;
        else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, double>) return format_number(v);
        else return v ? "true" : "false";
      },
      cell);
}

std::optional<std::size_t> Dataset::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

void Dataset::check_invariants() const {
  std::vector<std::string> violations;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != columns.size()) {
      violations.push_back("row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                           " cells, expected " + std::to_string(columns.size()));
      continue;
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (!conforms(rows[r][c], columns[c].type)) {
        violations.push_back("row " + std::to_string(r) + ", column '" + columns[c].name +
                             "' does not conform to " + std::string(to_string(columns[c].type)));
      }
    }
  }
  if (!violations.empty()) throw ValidationError("invalid dataset", std::move(violations));
}

namespace {

ColumnType classify(const sparql::RdfTerm& t) {
  if (t.is_iri()) return ColumnType::iri;
  if (t.is_blank()) return ColumnType::string;
  const std::string& dt = t.datatype;
  if (sparql::is_integer_datatype(dt) || dt == xsd::kGYear) return ColumnType::integer;
  if (sparql::is_numeric_datatype(dt)) return ColumnType::decimal;
  if (dt == xsd::kBoolean) return ColumnType::boolean;
  if (dt == xsd::kDate || dt == xsd::kDateTime) return ColumnType::date;
  return ColumnType::string;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    if (s == "INF") return HUGE_VAL;
    if (s == "-INF") return -HUGE_VAL;
    return std::nullopt;
  }
}

// Converts a bound term into a cell of `type`; nullopt when it does not conform.
std::optional<Cell> convert(const sparql::RdfTerm& t, ColumnType type) {
  const ColumnType own = classify(t);
  if (type == ColumnType::string) {
    return Cell(t.is_blank() ? "_:" + t.value : t.value);
  }
  if (type == ColumnType::decimal && own == ColumnType::integer) {
    if (auto v = parse_int(t.value)) return Cell(static_cast<double>(*v));
    return std::nullopt;
  }
  if (own != type) return std::nullopt;
  switch (type) {
    case ColumnType::integer:
      if (t.datatype == xsd::kGYear) {
        if (auto v = parse_int(t.value.substr(0, t.value.find_first_of("Z+", 1)))) return Cell(*v);
        return std::nullopt;
      }
      if (auto v = parse_int(t.value)) return Cell(*v);
      return std::nullopt;
    case ColumnType::decimal:
      if (auto v = parse_double(t.value)) return Cell(*v);
      return std::nullopt;
    case ColumnType::boolean:
      if (t.value == "true" || t.value == "1") return Cell(true);
      if (t.value == "false" || t.value == "0") return Cell(false);
      return std::nullopt;
    default: return Cell(t.value);
  }
}

}  // namespace

Dataset tabulate(const sparql::ResultSet& results, Provenance provenance) {
  Dataset d;
  d.provenance = std::move(provenance);
  for (const auto& var : results.variables) {
    std::map<ColumnType, std::size_t> votes;
    for (const auto& row : results.rows) {
      if (auto it = row.find(var); it != row.end()) ++votes[classify(it->second)];
    }
    ColumnType type = ColumnType::string;
    std::size_t best = 0;
    bool tie = false;
    for (const auto& [t, n] : votes) {
      if (n > best) {
        best = n;
        type = t;
        tie = false;
      } else if (n == best) {
        tie = true;
      }
    }
    if (tie) type = ColumnType::string;
    d.columns.push_back({var, type});
  }

  std::vector<std::size_t> coerced(d.columns.size(), 0);
  std::vector<std::size_t> bound(d.columns.size(), 0);
  d.rows.reserve(results.rows.size());
  for (const auto& row : results.rows) {
    std::vector<Cell> cells;
    cells.reserve(d.columns.size());
    for (std::size_t c = 0; c < d.columns.size(); ++c) {
      auto it = row.find(d.columns[c].name);
      if (it == row.end()) {
        cells.emplace_back();
        continue;
      }
      ++bound[c];
      if (auto cell = convert(it->second, d.columns[c].type)) {
        cells.push_back(std::move(*cell));
      } else {
        ++coerced[c];
        cells.emplace_back();
      }
    }
    d.rows.push_back(std::move(cells));
  }
  for (std::size_t c = 0; c < d.columns.size(); ++c) {
    if (coerced[c] == 0) continue;
    d.provenance.warnings.push_back("column '" + d.columns[c].name + "': " +
                                    std::to_string(coerced[c]) + " of " + std::to_string(bound[c]) +
                                    " values do not conform to " +
                                    std::string(to_string(d.columns[c].type)) +
                                    " and were set to missing");
  }
  return d;
}

namespace {

json cell_to_json(const Cell& cell) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return nullptr;
        else return v;
      },
      cell);
}

Cell cell_from_json(const json& v, ColumnType type, const std::string& where) {
  if (v.is_null()) return {};
  switch (type) {
    case ColumnType::integer:
      if (v.is_number_integer()) return v.get<std::int64_t>();
      break;
    case ColumnType::decimal:
      if (v.is_number()) return v.get<double>();
      break;
    case ColumnType::boolean:
      if (v.is_boolean()) return v.get<bool>();
      break;
    default:
      if (v.is_string()) return v.get<std::string>();
      break;
  }
  throw ValidationError("invalid dataset document",
                        {where + ": value does not conform to " + std::string(to_string(type))});
}

}  // namespace

json to_json(const Dataset& d) {
  json columns = json::array();
  for (const auto& c : d.columns) columns.push_back({{"name", c.name}, {"type", to_string(c.type)}});
  json rows = json::array();
  for (const auto& r : d.rows) {
    json row = json::array();
    for (const auto& cell : r) row.push_back(cell_to_json(cell));
    rows.push_back(std::move(row));
  }
  return {{"columns", std::move(columns)},
          {"rows", std::move(rows)},
          {"provenance",
           {{"query_text", d.provenance.query_text},
            {"endpoint", d.provenance.endpoint},
            {"retrieved_at", d.provenance.retrieved_at},
            {"warnings", d.provenance.warnings}}}};
}

Dataset dataset_from_json(const json& doc) {
  try {
    Dataset d;
    for (const auto& c : doc.at("columns")) {
      d.columns.push_back({c.at("name").get<std::string>(),
                           column_type_from_string(c.at("type").get<std::string>())});
    }
    const auto& rows = doc.at("rows");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (!row.is_array() || row.size() != d.columns.size()) {
        throw ValidationError("invalid dataset document",
                              {"rows[" + std::to_string(r) + "]: wrong arity"});
      }
      std::vector<Cell> cells;
      for (std::size_t c = 0; c < row.size(); ++c) {
        cells.push_back(cell_from_json(row[c], d.columns[c].type,
                                       "rows[" + std::to_string(r) + "][" + std::to_string(c) + "]"));
      }
      d.rows.push_back(std::move(cells));
    }
    if (const auto it = doc.find("provenance"); it != doc.end()) {
      d.provenance.query_text = it->value("query_text", "");
      d.provenance.endpoint = it->value("endpoint", "");
      d.provenance.retrieved_at = it->value("retrieved_at", "");
      d.provenance.warnings = it->value("warnings", std::vector<std::string>{});
    }
    return d;
  } catch (const json::exception& e) {
    throw ValidationError("invalid dataset document", {e.what()});
  }
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string to_csv(const Dataset& d) {
  std::string out;
  for (std::size_t c = 0; c < d.columns.size(); ++c) {
    if (c) out += ',';
    out += csv_field(d.columns[c].name);
  }
  out += "\r\n";
  for (const auto& row : d.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += csv_field(cell_text(row[c]));
    }
    out += "\r\n";
  }
  return out;
}

}  // namespace compass::viz
