#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "compass/viz/dataset.hpp"

namespace compass::viz {

enum class Binning { none, decade };
enum class AggregateKind { none, count, sum, avg, min, max };

std::string_view to_string(Binning b);
std::string_view to_string(AggregateKind k);
Binning binning_from_string(std::string_view name);
AggregateKind aggregate_kind_from_string(std::string_view name);

inline constexpr std::string_view kUnknownGroupLabel = "(unknown)";

struct GroupSpec {
  std::string column;
  Binning binning = Binning::none;
};

struct MeasureSpec {
  AggregateKind kind = AggregateKind::count;
  std::string column;       // empty for count: counts rows
  std::string output_name;  // defaults to "count" or "<kind>_<column>"
};

class AggregationError : public Error {
 public:
  explicit AggregationError(const std::string& message) : Error("aggregation_error", message) {}
};

// Decade of a year: floor(y / 10) * 10.
std::int64_t decade_of(std::int64_t year);
std::string decade_label(std::int64_t decade);  // 1990 -> "1990s"
// Year extracted from an integer, decimal, date or numeric-string cell.
std::optional<std::int64_t> year_of(const Cell& cell);

// One row per group, ascending by group key, missing keys last. Binned keys
// become string labels such as "1990s".
Dataset aggregate(const Dataset& d, const GroupSpec& group, const MeasureSpec& measure);

}  // namespace compass::viz
