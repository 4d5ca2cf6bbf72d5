#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "compass/common/time.hpp"
#include "compass/neural/neural_layer.hpp"
#include "compass/sparql/results.hpp"
#include "compass/viz/chart.hpp"

namespace compass::pipeline {

enum class Stage { select_or_generate, execute, process, visualize_interpret, refine };

inline constexpr Stage kStages[] = {Stage::select_or_generate, Stage::execute, Stage::process,
                                    Stage::visualize_interpret, Stage::refine};

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view name);

struct StepRecord {
  Stage stage = Stage::select_or_generate;
  Timestamp started{};
  Timestamp finished{};
  std::string inputs_digest;
  std::string outputs_digest;
  std::optional<std::string> error;
  bool reused = false;  // copied from the parent outcome
  bool idle = false;    // refine stage with no refinement requested
  std::string note;
  std::vector<std::string> warnings;
  std::vector<neural::LlmExchange> llm_calls;
};

nlohmann::json to_json(const StepRecord& s);
StepRecord step_from_json(const nlohmann::json& doc);

enum class QuestionKind { curated, custom };

struct QuestionRef {
  QuestionKind kind = QuestionKind::curated;
  std::string use_case_id;
  int index = 0;  // curated only
  std::string text;

  bool operator==(const QuestionRef&) const = default;
};

enum class OutcomeStatus { complete, failed };

struct Failure {
  Stage stage = Stage::select_or_generate;
  std::string code;
  std::string message;
  std::vector<std::string> diagnostics;

  bool operator==(const Failure&) const = default;
};

struct QuestionOutcome {
  std::string outcome_id;
  std::string session_id;
  std::string parent_outcome_id;  // set on refinements
  bool imported = false;

  QuestionRef question;
  std::string schema_fingerprint;
  std::optional<nlohmann::json> llm_config;  // redacted form; absent for curated runs
  std::string query_text;
  std::vector<neural::CandidateQuery> query_history;
  std::optional<sparql::ResultSet> result;
  std::optional<viz::Dataset> dataset;
  std::optional<viz::ChartSpec> chart;
  std::optional<neural::Interpretation> interpretation;
  std::vector<StepRecord> steps;
  OutcomeStatus status = OutcomeStatus::complete;
  std::optional<Failure> failure;
};

nlohmann::json to_json(const QuestionOutcome& o);
QuestionOutcome outcome_from_json(const nlohmann::json& doc);

// Every LLM exchange of the outcome in call order.
std::vector<neural::LlmExchange> prompt_transcript(const QuestionOutcome& o);
std::size_t llm_call_count(const QuestionOutcome& o);

// Serialization with identifiers, timestamps, latencies and the imported
// flag removed; equal for runs that did the same work.
nlohmann::json normalized_json(const QuestionOutcome& o);
std::string trace_digest(const QuestionOutcome& o);

}  // namespace compass::pipeline
