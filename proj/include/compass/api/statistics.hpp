#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "compass/catalog/catalog.hpp"
#include "compass/session/session_store.hpp"

namespace compass::api {

struct UseCaseStatistics {
  std::string use_case_id;
  std::size_t curated_questions = 0;
  std::size_t curated_executions = 0;
  std::size_t custom_questions = 0;
  std::size_t custom_complete = 0;
  // custom_complete / custom_questions; empty before the first custom question
  std::optional<double> success_rate;
  Timestamp last_reload{};
};

struct StatisticsReport {
  std::vector<UseCaseStatistics> use_cases;
};

// Counts first-run outcomes only: refinements and imported outcomes are
// excluded.
StatisticsReport compute_statistics(const catalog::Catalog& catalog, const session::SessionStore& store);

nlohmann::json to_json(const StatisticsReport& report);

}  // namespace compass::api
