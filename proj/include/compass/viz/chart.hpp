#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "compass/viz/aggregate.hpp"
#include "compass/viz/dataset.hpp"

namespace compass::viz {

enum class ChartKind { bar, stacked_bar, line, pie, scatter, table };

std::string_view to_string(ChartKind k);
std::optional<ChartKind> chart_kind_from_string(std::string_view name);

inline constexpr int kChartDocumentVersion = 1;

struct XEncoding {
  std::string column;
  Binning binning = Binning::none;
  bool operator==(const XEncoding&) const = default;
};

struct YEncoding {
  std::string column;
  AggregateKind aggregate = AggregateKind::none;
  bool operator==(const YEncoding&) const = default;
};

struct SortSpec {
  std::string column;
  bool descending = false;
  bool operator==(const SortSpec&) const = default;
};

struct ChartSpec {
  ChartKind kind = ChartKind::table;
  std::optional<XEncoding> x;
  std::vector<YEncoding> y;
  std::optional<std::string> series;
  std::string title;
  std::optional<SortSpec> sort;

  bool operator==(const ChartSpec&) const = default;
};

// Empty iff `spec` is renderable against `d`.
std::vector<std::string> validate_chart(const ChartSpec& spec, const Dataset& d);

// Deterministic fallback; always valid for `d`.
ChartSpec default_chart(const Dataset& d, std::string title = {});

nlohmann::json to_json(const ChartSpec& spec);
// Throws ValidationError on structural problems (unknown kind, bad fields).
ChartSpec chart_from_json(const nlohmann::json& doc);

// Versioned document consumed by the dashboard: spec plus inline column data.
nlohmann::json chart_document(const ChartSpec& spec, const Dataset& d);

}  // namespace compass::viz
