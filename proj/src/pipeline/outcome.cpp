#include "compass/pipeline/outcome.hpp"

#include "compass/common/digest.hpp"

namespace compass::pipeline {

using nlohmann::json;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::select_or_generate: return "select-or-generate";
    case Stage::execute: return "execute";
    case Stage::process: return "process";
    case Stage::visualize_interpret: return "visualize-interpret";
    case Stage::refine: return "refine";
  }
  return "refine";
}

Stage stage_from_string(std::string_view name) {
  for (auto s : kStages)
    if (to_string(s) == name) return s;
  throw Error("invalid_value", "unknown pipeline stage '" + std::string(name) + "'");
}

json to_json(const StepRecord& s) {
  json calls = json::array();
  for (const auto& c : s.llm_calls) calls.push_back(neural::to_json(c));
  json doc = {{"stage", to_string(s.stage)},
              {"started", format_timestamp(s.started)},
              {"finished", format_timestamp(s.finished)},
              {"inputs_digest", s.inputs_digest},
              {"outputs_digest", s.outputs_digest},
              {"error", s.error ? json(*s.error) : json(nullptr)},
              {"reused", s.reused},
              {"idle", s.idle},
              {"note", s.note},
              {"warnings", s.warnings},
              {"llm_calls", std::move(calls)}};
  return doc;
}

StepRecord step_from_json(const json& doc) {
  StepRecord s;
  s.stage = stage_from_string(doc.at("stage").get<std::string>());
  s.started = parse_timestamp(doc.at("started").get<std::string>());
  s.finished = parse_timestamp(doc.at("finished").get<std::string>());
  s.inputs_digest = doc.value("inputs_digest", std::string{});
  s.outputs_digest = doc.value("outputs_digest", std::string{});
  if (doc.contains("error") && doc["error"].is_string()) s.error = doc["error"].get<std::string>();
  s.reused = doc.value("reused", false);
  s.idle = doc.value("idle", false);
  s.note = doc.value("note", std::string{});
  s.warnings = doc.value("warnings", std::vector<std::string>{});
  for (const auto& c : doc.value("llm_calls", json::array())) s.llm_calls.push_back(neural::exchange_from_json(c));
  return s;
}

namespace {

json question_json(const QuestionRef& q) {
  json doc = {{"kind", q.kind == QuestionKind::curated ? "curated" : "custom"},
              {"use_case_id", q.use_case_id},
              {"text", q.text}};
  if (q.kind == QuestionKind::curated) doc["index"] = q.index;
  return doc;
}

QuestionRef question_from_json(const json& doc) {
  QuestionRef q;
  const auto kind = doc.at("kind").get<std::string>();
  if (kind == "curated") q.kind = QuestionKind::curated;
  else if (kind == "custom") q.kind = QuestionKind::custom;
  else throw ValidationError("invalid outcome", {"unknown question kind '" + kind + "'"});
  q.use_case_id = doc.at("use_case_id").get<std::string>();
  q.text = doc.value("text", std::string{});
  q.index = doc.value("index", 0);
  return q;
}

template <typename T, typename F>
json optional_json(const std::optional<T>& v, F&& f) {
  return v ? f(*v) : json(nullptr);
}

}  // namespace

json to_json(const QuestionOutcome& o) {
  json history = json::array();
  for (const auto& c : o.query_history) history.push_back(neural::to_json(c));
  json steps = json::array();
  for (const auto& s : o.steps) steps.push_back(to_json(s));
  json doc = {
      {"outcome_id", o.outcome_id},
      {"session_id", o.session_id},
      {"parent_outcome_id", o.parent_outcome_id},
      {"imported", o.imported},
      {"question", question_json(o.question)},
      {"schema_fingerprint", o.schema_fingerprint},
      {"llm_config", o.llm_config ? *o.llm_config : json(nullptr)},
      {"query_text", o.query_text},
      {"query_history", std::move(history)},
      {"result", optional_json(o.result, [](const auto& r) { return sparql::results_to_json(r); })},
      {"dataset", optional_json(o.dataset, [](const auto& d) { return viz::to_json(d); })},
      {"chart", optional_json(o.chart, [](const auto& c) { return viz::to_json(c); })},
      {"interpretation", optional_json(o.interpretation, [](const auto& i) { return neural::to_json(i); })},
      {"steps", std::move(steps)},
      {"status", o.status == OutcomeStatus::complete ? "complete" : "failed"},
  };
  if (o.failure) {
    doc["failure"] = {{"stage", to_string(o.failure->stage)},
                      {"code", o.failure->code},
                      {"message", o.failure->message},
                      {"diagnostics", o.failure->diagnostics}};
  } else {
    doc["failure"] = nullptr;
  }
  return doc;
}

QuestionOutcome outcome_from_json(const json& doc) {
  QuestionOutcome o;
  o.outcome_id = doc.value("outcome_id", std::string{});
  o.session_id = doc.value("session_id", std::string{});
  o.parent_outcome_id = doc.value("parent_outcome_id", std::string{});
  o.imported = doc.value("imported", false);
  o.question = question_from_json(doc.at("question"));
  o.schema_fingerprint = doc.value("schema_fingerprint", std::string{});
  if (doc.contains("llm_config") && !doc["llm_config"].is_null()) o.llm_config = doc["llm_config"];
  o.query_text = doc.value("query_text", std::string{});
  for (const auto& c : doc.value("query_history", json::array())) o.query_history.push_back(neural::candidate_from_json(c));
  auto present = [&](const char* key) { return doc.contains(key) && !doc[key].is_null(); };
  if (present("result")) o.result = sparql::results_from_json(doc["result"]);
  if (present("dataset")) o.dataset = viz::dataset_from_json(doc["dataset"]);
  if (present("chart")) o.chart = viz::chart_from_json(doc["chart"]);
  if (present("interpretation")) o.interpretation = neural::interpretation_from_json(doc["interpretation"]);
  for (const auto& s : doc.value("steps", json::array())) o.steps.push_back(step_from_json(s));
  const auto status = doc.at("status").get<std::string>();
  if (status == "complete") o.status = OutcomeStatus::complete;
  else if (status == "failed") o.status = OutcomeStatus::failed;
  else throw ValidationError("invalid outcome", {"unknown status '" + status + "'"});
  if (present("failure")) {
    const auto& f = doc["failure"];
    o.failure = Failure{stage_from_string(f.at("stage").get<std::string>()), f.value("code", std::string{}),
                        f.value("message", std::string{}), f.value("diagnostics", std::vector<std::string>{})};
  }
  return o;
}

std::vector<neural::LlmExchange> prompt_transcript(const QuestionOutcome& o) {
  std::vector<neural::LlmExchange> out;
  for (const auto& s : o.steps) out.insert(out.end(), s.llm_calls.begin(), s.llm_calls.end());
  return out;
}

std::size_t llm_call_count(const QuestionOutcome& o) {
  std::size_t n = 0;
  for (const auto& s : o.steps) n += s.llm_calls.size();
  return n;
}

json normalized_json(const QuestionOutcome& o) {
  auto doc = to_json(o);
  for (const char* key : {"outcome_id", "session_id", "parent_outcome_id", "imported"}) doc.erase(key);
  if (doc["dataset"].is_object()) doc["dataset"]["provenance"].erase("retrieved_at");
  for (auto& s : doc["steps"]) {
    s.erase("started");
    s.erase("finished");
    for (auto& c : s["llm_calls"]) {
      c.erase("started_at");
      c.erase("latency_ms");
    }
  }
  return doc;
}

std::string trace_digest(const QuestionOutcome& o) { return json_digest(normalized_json(o)); }

}  // namespace compass::pipeline
