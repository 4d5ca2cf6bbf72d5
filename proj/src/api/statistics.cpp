#include "compass/api/statistics.hpp"

#include <map>

namespace compass::api {

using nlohmann::json;

StatisticsReport compute_statistics(const catalog::Catalog& catalog, const session::SessionStore& store) {
  std::map<std::string, UseCaseStatistics> by_id;
  for (const auto& d : catalog.list_use_cases()) {
    auto& s = by_id[d.use_case_id];
    s.use_case_id = d.use_case_id;
    s.curated_questions = catalog.list_questions(d.use_case_id).size();
    s.last_reload = catalog.last_reload(d.use_case_id);
  }
  for (const auto& o : store.all_outcomes()) {
    if (o.imported || !o.parent_outcome_id.empty()) continue;
    auto it = by_id.find(o.question.use_case_id);
    if (it == by_id.end()) continue;
    auto& s = it->second;
    if (o.question.kind == pipeline::QuestionKind::curated) {
      ++s.curated_executions;
    } else {
      ++s.custom_questions;
      if (o.status == pipeline::OutcomeStatus::complete) ++s.custom_complete;
    }
  }
  StatisticsReport report;
  for (auto& [_, s] : by_id) {
    if (s.custom_questions > 0)
      s.success_rate = static_cast<double>(s.custom_complete) / static_cast<double>(s.custom_questions);
    report.use_cases.push_back(s);
  }
  return report;
}

json to_json(const StatisticsReport& report) {
  json use_cases = json::array();
  for (const auto& s : report.use_cases) {
    use_cases.push_back({{"use_case_id", s.use_case_id},
                         {"curated_questions", s.curated_questions},
                         {"curated_executions", s.curated_executions},
                         {"custom_questions", s.custom_questions},
                         {"custom_complete", s.custom_complete},
                         {"success_rate", s.success_rate ? json(*s.success_rate) : json(nullptr)},
                         {"last_catalog_reload", format_timestamp(s.last_reload)}});
  }
  return {{"use_cases", use_cases}};
}

}  // namespace compass::api
