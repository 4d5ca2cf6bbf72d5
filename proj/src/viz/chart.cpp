#include "compass/viz/chart.hpp"

#include <map>

namespace compass::viz {

using nlohmann::json;

std::string_view to_string(ChartKind k) {
  switch (k) {
    case ChartKind::bar: return "bar";
    case ChartKind::stacked_bar: return "stacked-bar";
    case ChartKind::line: return "line";
    case ChartKind::pie: return "pie";
    case ChartKind::scatter: return "scatter";
    case ChartKind::table: return "table";
  }
  return "table";
}

std::optional<ChartKind> chart_kind_from_string(std::string_view name) {
  static const std::map<std::string_view, ChartKind> names = {
      {"bar", ChartKind::bar},         {"stacked-bar", ChartKind::stacked_bar},
      {"line", ChartKind::line},       {"pie", ChartKind::pie},
      {"scatter", ChartKind::scatter}, {"table", ChartKind::table}};
  auto it = names.find(name);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> validate_chart(const ChartSpec& spec, const Dataset& d) {
  std::vector<std::string> v;
  if (spec.kind == ChartKind::table) return v;
  const std::string kind(to_string(spec.kind));

  auto column = [&](const std::string& name, const std::string& role) -> const Column* {
    if (auto i = d.column_index(name)) return &d.columns[*i];
    v.push_back(role + " references nonexistent column '" + name + "'");
    return nullptr;
  };

  if (!spec.x) {
    v.push_back(kind + " chart requires an x encoding");
  } else if (const Column* x = column(spec.x->column, "x")) {
    if (spec.x->binning == Binning::decade && x->type == ColumnType::boolean) {
      v.push_back("decade binning needs a year-like x column, '" + x->name + "' is boolean");
    }
    if (spec.kind == ChartKind::scatter && !is_numeric(x->type) && x->type != ColumnType::date) {
      v.push_back("scatter chart needs a numeric or date x column, '" + x->name + "' is " +
                  std::string(to_string(x->type)));
    }
  }
  if (spec.y.empty()) v.push_back(kind + " chart requires at least one y measure");
  for (const auto& y : spec.y) {
    const Column* c = column(y.column, "y");
    if (c && y.aggregate != AggregateKind::count && !is_numeric(c->type)) {
      v.push_back("y column '" + c->name + "' is " + std::string(to_string(c->type)) +
                  ", a numeric column is required for aggregate " +
                  std::string(to_string(y.aggregate)));
    }
  }
  if (spec.series) column(*spec.series, "series");
  if (spec.sort) column(spec.sort->column, "sort");

  if (spec.kind == ChartKind::pie && (spec.y.size() != 1 || spec.series)) {
    v.push_back("pie requires exactly one category and one measure");
  }
  if (spec.kind == ChartKind::stacked_bar && !spec.series) {
    v.push_back("stacked-bar requires a series column");
  }
  return v;
}

ChartSpec default_chart(const Dataset& d, std::string title) {
  ChartSpec spec;
  spec.title = std::move(title);
  spec.kind = ChartKind::table;
  if (d.columns.size() < 2) return spec;

  const Column& first = d.columns[0];
  const Column* measure = nullptr;
  for (std::size_t i = 1; i < d.columns.size(); ++i) {
    if (is_numeric(d.columns[i].type)) {
      measure = &d.columns[i];
      break;
    }
  }
  if (!measure) return spec;

  const bool ordered = first.type == ColumnType::date || is_numeric(first.type);
  const bool category = first.type == ColumnType::string || first.type == ColumnType::iri ||
                        first.type == ColumnType::boolean;
  if (!ordered && !category) return spec;
  spec.kind = ordered ? ChartKind::line : ChartKind::bar;
  spec.x = XEncoding{first.name, Binning::none};
  spec.y = {YEncoding{measure->name, AggregateKind::none}};
  return spec;
}

json to_json(const ChartSpec& spec) {
  json doc = {{"kind", to_string(spec.kind)}, {"title", spec.title}};
  doc["x"] = spec.x ? json{{"column", spec.x->column}, {"binning", to_string(spec.x->binning)}}
                    : json(nullptr);
  json y = json::array();
  for (const auto& m : spec.y) y.push_back({{"column", m.column}, {"aggregate", to_string(m.aggregate)}});
  doc["y"] = std::move(y);
  doc["series"] = spec.series ? json(*spec.series) : json(nullptr);
  doc["sort"] = spec.sort ? json{{"column", spec.sort->column},
                                 {"direction", spec.sort->descending ? "desc" : "asc"}}
                          : json(nullptr);
  return doc;
}

ChartSpec chart_from_json(const json& doc) {
  std::vector<std::string> v;
  ChartSpec spec;
  if (!doc.is_object()) throw ValidationError("invalid chart spec", {"chart spec must be an object"});
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    if (auto k = chart_kind_from_string(kind)) {
      spec.kind = *k;
    } else {
      v.push_back("unknown chart kind '" + kind + "'");
    }
    spec.title = doc.value("title", "");
    if (auto it = doc.find("x"); it != doc.end() && !it->is_null()) {
      if (it->is_string()) {
        spec.x = XEncoding{it->get<std::string>(), Binning::none};
      } else {
        spec.x = XEncoding{it->at("column").get<std::string>(),
                           binning_from_string(it->value("binning", "none"))};
      }
    }
    if (auto it = doc.find("y"); it != doc.end() && !it->is_null()) {
      auto read = [&](const json& m) {
        if (m.is_string()) return YEncoding{m.get<std::string>(), AggregateKind::none};
        return YEncoding{m.at("column").get<std::string>(),
                         aggregate_kind_from_string(m.value("aggregate", "none"))};
      };
      if (it->is_array()) {
        for (const auto& m : *it) spec.y.push_back(read(m));
      } else {
        spec.y.push_back(read(*it));
      }
    }
    if (auto it = doc.find("series"); it != doc.end() && !it->is_null()) {
      spec.series = it->get<std::string>();
    }
    if (auto it = doc.find("sort"); it != doc.end() && !it->is_null()) {
      const std::string dir = it->value("direction", "asc");
      if (dir != "asc" && dir != "desc") v.push_back("sort direction must be 'asc' or 'desc'");
      spec.sort = SortSpec{it->at("column").get<std::string>(), dir == "desc"};
    }
  } catch (const json::exception& e) {
    v.push_back(e.what());
  } catch (const Error& e) {
    v.push_back(e.what());
  }
  if (!v.empty()) throw ValidationError("invalid chart spec", std::move(v));
  return spec;
}

namespace {

json column_arrays(const Dataset& d) {
  json cols = json::array();
  for (std::size_t c = 0; c < d.columns.size(); ++c) {
    json values = json::array();
    for (const auto& row : d.rows) {
      values.push_back(std::visit(
          [](const auto& x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) return nullptr;
            else return x;
          },
          row[c]));
    }
    cols.push_back({{"name", d.columns[c].name},
                    {"type", to_string(d.columns[c].type)},
                    {"values", std::move(values)}});
  }
  return cols;
}

}  // namespace

json chart_document(const ChartSpec& spec, const Dataset& d) {
  json doc = {{"chart_document_version", kChartDocumentVersion},
              {"spec", to_json(spec)},
              {"data", column_arrays(d)},
              {"unknown_label", kUnknownGroupLabel}};
  // Binned or aggregated single-measure charts also carry the grouped view
  // so renderers do not need to re-implement the aggregation rules.
  const bool needs_view = spec.kind != ChartKind::table && spec.x && spec.y.size() == 1 &&
                          !spec.series &&
                          (spec.x->binning != Binning::none ||
                           spec.y[0].aggregate != AggregateKind::none);
  if (needs_view && validate_chart(spec, d).empty()) {
    MeasureSpec m;
    m.kind = spec.y[0].aggregate == AggregateKind::none ? AggregateKind::sum : spec.y[0].aggregate;
    m.column = spec.y[0].column;
    m.output_name = spec.y[0].column;
    try {
      doc["view"] = column_arrays(aggregate(d, {spec.x->column, spec.x->binning}, m));
    } catch (const AggregationError&) {
      // Non-numeric measures stay unaggregated; validate_chart already allowed count only.
    }
  }
  return doc;
}

}  // namespace compass::viz
