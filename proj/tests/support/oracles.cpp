#include "support/oracles.hpp"

#include <cmath>

namespace compass::fixtures {

using viz::AggregateKind;
using viz::Cell;
using viz::ColumnType;

namespace {

// Decade key as an integer, computed through floating point floor.
std::optional<std::int64_t> decade_key(const Cell& c) {
  double year = 0;
  if (const auto* i = std::get_if<std::int64_t>(&c)) {
    year = static_cast<double>(*i);
  } else if (const auto* d = std::get_if<double>(&c)) {
    year = std::floor(*d);
  } else if (const auto* s = std::get_if<std::string>(&c)) {
    // Dates as "YYYY-MM-DD" or plain digit strings.
    std::size_t n = 0;
    while (n < s->size() && (*s)[n] >= '0' && (*s)[n] <= '9') ++n;
    if (n == 0 || (n < s->size() && (*s)[n] != '-')) return std::nullopt;
    year = std::stod(s->substr(0, n));
  } else {
    return std::nullopt;
  }
  return static_cast<std::int64_t>(std::floor(year / 10.0) * 10.0);
}

double as_double(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  return std::get<double>(c);
}

bool key_before(const Cell& a, const Cell& b) {
  if (viz::is_missing(a)) return false;
  if (viz::is_missing(b)) return true;
  return a < b;
}

}  // namespace

viz::Dataset reference_aggregate(const viz::Dataset& d, const viz::GroupSpec& group,
                                 const viz::MeasureSpec& measure) {
  std::size_t gi = 0;
  while (d.columns[gi].name != group.column) ++gi;
  std::optional<std::size_t> mi;
  for (std::size_t c = 0; c < d.columns.size(); ++c) {
    if (!measure.column.empty() && d.columns[c].name == measure.column) mi = c;
  }
  const bool binned = group.binning == viz::Binning::decade;

  auto key_of = [&](const std::vector<Cell>& row) -> Cell {
    if (!binned) return row[gi];
    if (auto k = decade_key(row[gi])) return *k;
    return {};
  };

  std::vector<Cell> keys;
  for (const auto& row : d.rows) {
    Cell k = key_of(row);
    bool seen = false;
    for (const auto& existing : keys) seen = seen || existing == k;
    if (!seen) keys.push_back(k);
  }
  // Selection sort keeps the reference free of library ordering helpers.
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (std::size_t j = i + 1; j < keys.size(); ++j) {
      if (key_before(keys[j], keys[i])) std::swap(keys[i], keys[j]);
    }
  }

  const ColumnType mtype = mi ? d.columns[*mi].type : ColumnType::integer;
  viz::Dataset out;
  out.provenance = d.provenance;
  std::string gname = binned ? "decade" : d.columns[gi].name;
  std::string mname = measure.output_name;
  if (mname.empty()) {
    mname = measure.kind == AggregateKind::count && measure.column.empty()
                ? "count"
                : std::string(viz::to_string(measure.kind)) + "_" + measure.column;
  }
  if (mname == gname) mname += "_value";
  ColumnType otype = mtype;
  if (measure.kind == AggregateKind::count) otype = ColumnType::integer;
  if (measure.kind == AggregateKind::avg) otype = ColumnType::decimal;
  out.columns = {{gname, binned ? ColumnType::string : d.columns[gi].type}, {mname, otype}};

  for (const auto& k : keys) {
    std::int64_t rows = 0;
    std::int64_t present = 0;
    std::int64_t isum = 0;
    double dsum = 0;
    Cell lo, hi;
    for (const auto& row : d.rows) {
      if (!(key_of(row) == k)) continue;
      ++rows;
      if (!mi || viz::is_missing(row[*mi])) continue;
      const Cell& v = row[*mi];
      ++present;
      if (mtype == ColumnType::integer) isum += std::get<std::int64_t>(v);
      if (viz::is_numeric(mtype)) dsum += as_double(v);
      if (viz::is_missing(lo) || v < lo) lo = v;
      if (viz::is_missing(hi) || hi < v) hi = v;
    }
    Cell result;
    switch (measure.kind) {
      case AggregateKind::count: result = mi ? present : rows; break;
      case AggregateKind::sum:
        if (mtype == ColumnType::integer) result = isum;
        else result = dsum;
        break;
      case AggregateKind::avg:
        if (present > 0) result = dsum / static_cast<double>(present);
        break;
      case AggregateKind::min: result = lo; break;
      case AggregateKind::max: result = hi; break;
      case AggregateKind::none: break;
    }
    Cell label = k;
    if (binned && !viz::is_missing(k)) label = std::to_string(std::get<std::int64_t>(k)) + "s";
    out.rows.push_back({label, result});
  }
  return out;
}

viz::Dataset random_dataset(std::mt19937_64& rng, std::size_t max_rows) {
  viz::Dataset d;
  d.columns = {{"g_str", ColumnType::string},   {"g_int", ColumnType::integer},
               {"g_dec", ColumnType::decimal},  {"g_bool", ColumnType::boolean},
               {"g_date", ColumnType::date},    {"m_int", ColumnType::integer},
               {"m_dec", ColumnType::decimal}};
  std::uniform_int_distribution<std::size_t> row_count(0, max_rows);
  std::uniform_int_distribution<int> missing(0, 7);
  std::uniform_int_distribution<int> label(0, 5);
  std::uniform_int_distribution<std::int64_t> year(1950, 2030);
  std::uniform_int_distribution<std::int64_t> small(-1000, 1000);
  std::uniform_int_distribution<int> quarter(-400, 400);
  std::uniform_int_distribution<int> coin(0, 1);
  static const char* const kLabels[] = {"alpha", "beta", "gamma", "delta", "Alpha", ""};

  const std::size_t n = row_count(rng);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<Cell> row(d.columns.size());
    auto maybe = [&](Cell value) { return missing(rng) == 0 ? Cell{} : value; };
    row[0] = maybe(std::string(kLabels[label(rng)]));
    row[1] = maybe(year(rng));
    row[2] = maybe(static_cast<double>(year(rng)) + quarter(rng) / 400.0);
    row[3] = maybe(coin(rng) == 1);
    char date[32];
    std::snprintf(date, sizeof date, "%04d-%02d-01", static_cast<int>(year(rng)), 1 + label(rng));
    row[4] = maybe(std::string(date));
    row[5] = maybe(small(rng));
    row[6] = maybe(quarter(rng) / 8.0);
    d.rows.push_back(std::move(row));
  }
  return d;
}

}  // namespace compass::fixtures
