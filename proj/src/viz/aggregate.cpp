#include "compass/viz/aggregate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

namespace compass::viz {

std::string_view to_string(Binning b) { return b == Binning::decade ? "decade" : "none"; }

std::string_view to_string(AggregateKind k) {
  switch (k) {
    case AggregateKind::none: return "none";
    case AggregateKind::count: return "count";
    case AggregateKind::sum: return "sum";
    case AggregateKind::avg: return "avg";
    case AggregateKind::min: return "min";
    case AggregateKind::max: return "max";
  }
  return "none";
}

Binning binning_from_string(std::string_view name) {
  if (name == "none" || name.empty()) return Binning::none;
  if (name == "decade") return Binning::decade;
  throw Error("invalid_value", "unknown binning rule '" + std::string(name) + "'");
}

AggregateKind aggregate_kind_from_string(std::string_view name) {
  static const std::map<std::string_view, AggregateKind> names = {
      {"none", AggregateKind::none}, {"count", AggregateKind::count}, {"sum", AggregateKind::sum},
      {"avg", AggregateKind::avg},   {"min", AggregateKind::min},     {"max", AggregateKind::max}};
  auto it = names.find(name);
  if (it == names.end()) throw Error("invalid_value", "unknown aggregate '" + std::string(name) + "'");
  return it->second;
}

std::int64_t decade_of(std::int64_t year) {
  std::int64_t q = year / 10;
  if (year % 10 != 0 && year < 0) --q;
  return q * 10;
}

std::string decade_label(std::int64_t decade) { return std::to_string(decade) + "s"; }

std::optional<std::int64_t> year_of(const Cell& cell) {
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return *i;
  if (const auto* d = std::get_if<double>(&cell)) {
    if (!std::isfinite(*d)) return std::nullopt;
    return static_cast<std::int64_t>(std::floor(*d));
  }
  if (const auto* s = std::get_if<std::string>(&cell)) {
    std::string_view v = *s;
    std::size_t n = 0;
    if (!v.empty() && v[0] == '-') n = 1;
    while (n < v.size() && std::isdigit(static_cast<unsigned char>(v[n]))) ++n;
    if (n == 0 || (n == 1 && v[0] == '-')) return std::nullopt;
    // Whole string is a number, or a date that starts with the year.
    if (n != v.size() && v[n] != '-') return std::nullopt;
    std::int64_t year = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + n, year);
    if (ec != std::errc()) return std::nullopt;
    return year;
  }
  return std::nullopt;
}

namespace {

struct KeyLess {
  bool operator()(const Cell& a, const Cell& b) const {
    const bool ma = is_missing(a);
    const bool mb = is_missing(b);
    if (ma || mb) return !ma && mb;  // missing sorts last
    return a < b;
  }
};

}  // namespace

Dataset aggregate(const Dataset& d, const GroupSpec& group, const MeasureSpec& measure) {
  const auto gi = d.column_index(group.column);
  if (!gi) throw AggregationError("group column '" + group.column + "' does not exist");
  const Column& gcol = d.columns[*gi];
  if (group.binning == Binning::decade && gcol.type == ColumnType::boolean) {
    throw AggregationError("column '" + gcol.name + "' has type boolean, expected a year-like type for decade binning");
  }

  if (measure.kind == AggregateKind::none) {
    throw AggregationError("measure on '" + measure.column + "' needs an aggregate other than none");
  }
  std::optional<std::size_t> mi;
  if (!measure.column.empty()) {
    mi = d.column_index(measure.column);
    if (!mi) throw AggregationError("measure column '" + measure.column + "' does not exist");
  } else if (measure.kind != AggregateKind::count) {
    throw AggregationError(std::string(to_string(measure.kind)) + " requires a measure column");
  }
  const ColumnType mtype = mi ? d.columns[*mi].type : ColumnType::integer;
  if (measure.kind != AggregateKind::count && !is_numeric(mtype)) {
    throw AggregationError("column '" + measure.column + "' has type " +
                           std::string(to_string(mtype)) + ", expected integer or decimal for " +
                           std::string(to_string(measure.kind)));
  }

  std::map<Cell, std::vector<std::size_t>, KeyLess> groups;
  std::map<Cell, std::int64_t, KeyLess> decade_keys;
  for (std::size_t r = 0; r < d.rows.size(); ++r) {
    const Cell& raw = d.rows[r][*gi];
    Cell key;
    if (group.binning == Binning::decade) {
      if (auto y = year_of(raw)) key = decade_of(*y);
    } else {
      key = raw;
    }
    groups[key].push_back(r);
  }

  Dataset out;
  out.provenance = d.provenance;
  const std::string gname = group.binning == Binning::decade ? "decade" : gcol.name;
  const ColumnType gtype = group.binning == Binning::decade ? ColumnType::string : gcol.type;
  std::string mname = measure.output_name;
  if (mname.empty()) {
    mname = measure.kind == AggregateKind::count && measure.column.empty()
                ? "count"
                : std::string(to_string(measure.kind)) + "_" + measure.column;
  }
  if (mname == gname) mname += "_value";
  ColumnType otype = ColumnType::integer;
  switch (measure.kind) {
    case AggregateKind::count: otype = ColumnType::integer; break;
    case AggregateKind::avg: otype = ColumnType::decimal; break;
    default: otype = mtype; break;
  }
  out.columns = {{gname, gtype}, {mname, otype}};

  for (const auto& [key, members] : groups) {
    Cell label = key;
    if (group.binning == Binning::decade && !is_missing(key)) {
      label = decade_label(std::get<std::int64_t>(key));
    }
    std::vector<const Cell*> values;
    if (mi) {
      for (auto r : members) {
        if (!is_missing(d.rows[r][*mi])) values.push_back(&d.rows[r][*mi]);
      }
    }
    Cell result;
    switch (measure.kind) {
      case AggregateKind::count:
        result = static_cast<std::int64_t>(mi ? values.size() : members.size());
        break;
      case AggregateKind::sum:
      case AggregateKind::avg: {
        if (mtype == ColumnType::integer && measure.kind == AggregateKind::sum) {
          std::int64_t total = 0;
          for (const Cell* v : values) {
            if (__builtin_add_overflow(total, std::get<std::int64_t>(*v), &total)) {
              throw AggregationError("integer overflow summing column '" + measure.column + "'");
            }
          }
          result = total;
          break;
        }
        double total = 0;
        for (const Cell* v : values) {
          total += mtype == ColumnType::integer ? static_cast<double>(std::get<std::int64_t>(*v))
                                                : std::get<double>(*v);
        }
        if (measure.kind == AggregateKind::sum) result = total;
        else if (!values.empty()) result = total / static_cast<double>(values.size());
        break;
      }
      case AggregateKind::min:
      case AggregateKind::max: {
        for (const Cell* v : values) {
          if (is_missing(result) ||
              (measure.kind == AggregateKind::min ? *v < result : result < *v)) {
            result = *v;
          }
        }
        break;
      }
      case AggregateKind::none: break;
    }
    out.rows.push_back({std::move(label), std::move(result)});
  }
  return out;
}

}  // namespace compass::viz
