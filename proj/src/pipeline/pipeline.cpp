#include "compass/pipeline/pipeline.hpp"

#include <spdlog/spdlog.h>

#include "compass/common/digest.hpp"
#include "compass/common/ids.hpp"
#include "compass/common/text.hpp"
#include "compass/sparql/consistency.hpp"
#include "compass/viz/dataset.hpp"

namespace compass::pipeline {

using nlohmann::json;
using session::EventKind;

std::string_view to_string(RefineTarget t) {
  switch (t) {
    case RefineTarget::query: return "query";
    case RefineTarget::chart: return "chart";
    case RefineTarget::interpretation: return "interpretation";
  }
  return "query";
}

std::string_view to_string(RefineMode m) { return m == RefineMode::manual ? "manual" : "prompt"; }

RefineTarget refine_target_from_string(std::string_view name) {
  for (auto t : {RefineTarget::query, RefineTarget::chart, RefineTarget::interpretation})
    if (to_string(t) == name) return t;
  throw ValidationError("invalid refinement", {"unknown refinement target '" + std::string(name) + "'"});
}

RefineMode refine_mode_from_string(std::string_view name) {
  if (name == "manual") return RefineMode::manual;
  if (name == "prompt") return RefineMode::prompt;
  throw ValidationError("invalid refinement", {"unknown refinement mode '" + std::string(name) + "'"});
}

std::vector<std::string> query_diagnostics(const std::string& text, const schema::GraphSchema& schema) {
  if (text::trim(text).empty()) return {"query text is empty"};
  sparql::ParsedQuery parsed;
  try {
    parsed = sparql::parse_query(text);
  } catch (const Error& e) {
    return {e.what()};
  }
  std::vector<std::string> out;
  for (const auto& issue : sparql::check_schema_consistency(parsed, schema))
    out.push_back("<" + issue.iri + "> " + issue.message);
  return out;
}

namespace {

StepRecord begin_step(Stage stage, const json& inputs) {
  StepRecord s;
  s.stage = stage;
  s.started = now_utc();
  s.inputs_digest = json_digest(inputs);
  return s;
}

void end_step(StepRecord& s, const json& outputs) {
  s.finished = now_utc();
  s.outputs_digest = json_digest(outputs);
}

StepRecord idle_refine_step() {
  auto s = begin_step(Stage::refine, json::object());
  s.idle = true;
  end_step(s, json::object());
  return s;
}

StepRecord reused(StepRecord s) {
  s.reused = true;
  return s;
}

neural::Interpretation curated_interpretation(const catalog::CuratedQuestion& q) {
  return {q.interpretation, q.explanation, {}, neural::GeneratorKind::curated, {}};
}

json question_payload(const QuestionRef& q) {
  json doc = {{"kind", q.kind == QuestionKind::curated ? "curated" : "custom"},
              {"use_case_id", q.use_case_id},
              {"text", q.text}};
  if (q.kind == QuestionKind::curated) doc["index"] = q.index;
  return doc;
}

}  // namespace

struct Pipeline::Context {
  std::string session_id;
  std::shared_ptr<const schema::GraphSchema> schema;
  QuestionOutcome outcome;

  bool failed() const { return outcome.status == OutcomeStatus::failed; }

  void fail(StepRecord step, const std::string& code, const std::string& message,
            std::vector<std::string> diagnostics = {}) {
    step.error = code + ": " + message;
    step.finished = now_utc();
    outcome.steps.push_back(std::move(step));
    outcome.status = OutcomeStatus::failed;
    outcome.failure = Failure{outcome.steps.back().stage, code, message, std::move(diagnostics)};
  }
};

Pipeline::Pipeline(PipelineDeps deps) : deps_(std::move(deps)), gateway_(deps_.cache_ttl) {
  if (!deps_.schemas || !deps_.catalog || !deps_.sessions)
    throw PreconditionError("pipeline needs schemas, catalog and session store");
}

sparql::EndpointConfig Pipeline::endpoint_for(const std::string& use_case_id) const {
  std::string ref = use_case_id;
  try {
    auto d = deps_.catalog->descriptor(use_case_id);
    if (!d.endpoint_ref.empty()) ref = d.endpoint_ref;
  } catch (const NotFoundError&) {
  }
  auto it = deps_.endpoints.find(ref);
  if (it == deps_.endpoints.end()) throw PreconditionError("no endpoint configured for '" + ref + "'");
  return it->second;
}

bool Pipeline::execute_and_process(Context& ctx) {
  auto& o = ctx.outcome;
  auto exec = begin_step(Stage::execute, {{"query", o.query_text}, {"use_case_id", o.question.use_case_id}});
  std::string endpoint_url;
  try {
    const auto ep = endpoint_for(o.question.use_case_id);
    endpoint_url = ep.url;
    auto parsed = sparql::parse_query(o.query_text);
    o.result = gateway_.run(parsed, ep, ctx.schema->fingerprint);
  } catch (const Error& e) {
    ctx.fail(std::move(exec), e.code(), e.what());
    return false;
  }
  end_step(exec, sparql::results_to_json(*o.result));
  o.steps.push_back(std::move(exec));

  auto proc = begin_step(Stage::process, sparql::results_to_json(*o.result));
  try {
    o.dataset = viz::tabulate(*o.result, {o.query_text, endpoint_url, format_timestamp(now_utc()), {}});
  } catch (const Error& e) {
    ctx.fail(std::move(proc), e.code(), e.what());
    return false;
  }
  auto data_doc = viz::to_json(*o.dataset);
  data_doc["provenance"].erase("retrieved_at");
  end_step(proc, data_doc);
  o.steps.push_back(std::move(proc));
  return true;
}

void Pipeline::visualize_curated(Context& ctx, const viz::ChartSpec& chart, const neural::Interpretation& interp) {
  auto& o = ctx.outcome;
  auto step = begin_step(Stage::visualize_interpret, {{"chart", viz::to_json(chart)}, {"rows", o.dataset->rows.size()}});
  auto problems = viz::validate_chart(chart, *o.dataset);
  if (problems.empty()) {
    o.chart = chart;
  } else {
    o.chart = viz::default_chart(*o.dataset, chart.title);
    step.warnings.push_back("curated chart does not fit the live data, using the default chart: " +
                            text::join(problems, "; "));
  }
  o.interpretation = interp;
  end_step(step, {{"chart", viz::to_json(*o.chart)}, {"interpretation", neural::to_json(interp)}});
  o.steps.push_back(std::move(step));
}

void Pipeline::visualize_custom(Context& ctx, const neural::LlmConfig& cfg) {
  auto& o = ctx.outcome;
  auto step = begin_step(Stage::visualize_interpret, {{"question", o.question.text}, {"rows", o.dataset->rows.size()}});
  try {
    o.chart = deps_.neural->suggest_chart(o.question.text, *o.dataset, cfg, &step.llm_calls, &step.warnings);
    o.interpretation = deps_.neural->interpret_results(o.question.text, *o.dataset, *o.chart, cfg, &step.llm_calls);
  } catch (const Error& e) {
    ctx.fail(std::move(step), e.code(), e.what());
    return;
  }
  end_step(step, {{"chart", viz::to_json(*o.chart)}, {"interpretation", neural::to_json(*o.interpretation)}});
  o.steps.push_back(std::move(step));
}

QuestionOutcome Pipeline::finish(Context& ctx, const json* refinement_event) {
  auto& o = ctx.outcome;
  if (!ctx.failed() && (o.steps.empty() || o.steps.back().stage != Stage::refine)) o.steps.push_back(idle_refine_step());
  for (const auto& s : o.steps) {
    if (s.reused) continue;
    for (const auto& call : s.llm_calls)
      deps_.sessions->append_event(ctx.session_id, EventKind::llm_exchange, neural::to_json(call));
  }
  if (refinement_event) deps_.sessions->append_event(ctx.session_id, EventKind::refinement, *refinement_event);
  deps_.sessions->append_event(ctx.session_id, EventKind::outcome, to_json(o));
  spdlog::info("outcome {} in session {}: {}", o.outcome_id, ctx.session_id,
               o.status == OutcomeStatus::complete ? "complete" : "failed");
  return o;
}

QuestionOutcome Pipeline::run_curated(const std::string& use_case_id, int index, const std::string& session_id) {
  deps_.sessions->info(session_id);
  const auto q = deps_.catalog->get_question(use_case_id, index);
  auto lock_ptr = deps_.sessions->run_lock(session_id);
  std::lock_guard lock(*lock_ptr);

  Context ctx;
  ctx.session_id = session_id;
  ctx.schema = deps_.schemas->get(use_case_id);
  auto& o = ctx.outcome;
  o.outcome_id = random_id();
  o.session_id = session_id;
  o.question = {QuestionKind::curated, use_case_id, index, q.question_text};
  o.schema_fingerprint = ctx.schema->fingerprint;
  deps_.sessions->append_event(session_id, EventKind::question_submitted, question_payload(o.question));

  auto select = begin_step(Stage::select_or_generate, {{"use_case_id", use_case_id}, {"index", index}});
  o.query_text = q.sparql_text;
  o.query_history.push_back({q.sparql_text, "curated", 1, {}});
  end_step(select, {{"query", o.query_text}});
  o.steps.push_back(std::move(select));

  if (execute_and_process(ctx)) visualize_curated(ctx, q.chart, curated_interpretation(q));
  return finish(ctx);
}

QuestionOutcome Pipeline::run_custom(const std::string& question, const std::string& use_case_id,
                                     const std::string& session_id, const neural::LlmConfig& cfg) {
  const auto text = text::trim(question);
  if (text.empty()) throw PreconditionError("question text is empty");
  if (!deps_.neural) throw PreconditionError("custom questions need a configured LLM provider");
  cfg.validate();
  deps_.sessions->info(session_id);
  auto lock_ptr = deps_.sessions->run_lock(session_id);
  std::lock_guard lock(*lock_ptr);

  Context ctx;
  ctx.session_id = session_id;
  ctx.schema = deps_.schemas->get(use_case_id);
  auto& o = ctx.outcome;
  o.outcome_id = random_id();
  o.session_id = session_id;
  o.question = {QuestionKind::custom, use_case_id, 0, text};
  o.schema_fingerprint = ctx.schema->fingerprint;
  o.llm_config = neural::redacted_json(cfg);
  deps_.sessions->append_event(session_id, EventKind::question_submitted, question_payload(o.question));

  auto history = deps_.sessions->current(session_id).context;
  auto repair_history = history;
  repair_history.push_back({neural::Role::user, "Question: " + text});

  auto step = begin_step(Stage::select_or_generate, {{"question", text}, {"schema", ctx.schema->fingerprint}});
  auto& neural = *deps_.neural;
  const int max_attempts = neural.options().max_repair_attempts;
  neural::CandidateQuery candidate;
  std::vector<std::string> all_diagnostics;
  try {
    try {
      candidate = neural.generate_query(text, *ctx.schema, history, cfg, &step.llm_calls);
    } catch (const neural::ExtractionError& e) {
      candidate = {"", "", 1, {e.what()}};
    }
    while (true) {
      if (candidate.diagnostics.empty()) candidate.diagnostics = query_diagnostics(candidate.sparql_text, *ctx.schema);
      o.query_history.push_back(candidate);
      for (const auto& d : candidate.diagnostics)
        all_diagnostics.push_back("attempt " + std::to_string(candidate.attempt) + ": " + d);
      if (candidate.diagnostics.empty()) break;
      if (candidate.attempt >= max_attempts) {
        ctx.fail(std::move(step), "repair_exhausted",
                 "no valid query after " + std::to_string(candidate.attempt) + " attempt(s)", all_diagnostics);
        return finish(ctx);
      }
      const auto diags = candidate.diagnostics;
      try {
        candidate = neural.repair_query(candidate, diags, *ctx.schema, repair_history, cfg, &step.llm_calls);
        candidate.diagnostics.clear();
      } catch (const neural::ExtractionError& e) {
        candidate = {"", "", candidate.attempt + 1, {e.what()}};
      }
    }
  } catch (const Error& e) {
    ctx.fail(std::move(step), e.code(), e.what(), all_diagnostics);
    return finish(ctx);
  }
  o.query_text = candidate.sparql_text;
  end_step(step, {{"query", o.query_text}, {"attempts", candidate.attempt}});
  o.steps.push_back(std::move(step));

  if (execute_and_process(ctx)) visualize_custom(ctx, cfg);
  return finish(ctx);
}

QuestionOutcome Pipeline::refine(const std::string& session_id, const std::string& outcome_id,
                                 const std::string& instruction, RefineTarget target, RefineMode mode,
                                 const std::optional<neural::LlmConfig>& cfg_override) {
  deps_.sessions->info(session_id);
  auto lock_ptr = deps_.sessions->run_lock(session_id);
  std::lock_guard lock(*lock_ptr);

  auto base = deps_.sessions->find_outcome(session_id, outcome_id);
  if (!base) throw NotFoundError("outcome '" + outcome_id + "' not found in session '" + session_id + "'");
  if (text::trim(instruction).empty()) throw PreconditionError("refinement instruction is empty");
  if (target != RefineTarget::query && !base->dataset)
    throw PreconditionError("outcome '" + outcome_id + "' has no data to refine a " + std::string(to_string(target)) +
                            " for");

  std::optional<neural::LlmConfig> cfg = cfg_override;
  if (!cfg && base->llm_config) cfg = neural::config_from_json(*base->llm_config);
  if (mode == RefineMode::prompt) {
    if (!deps_.neural) throw PreconditionError("prompt refinement needs a configured LLM provider");
    if (!cfg) throw PreconditionError("prompt refinement needs an LLM configuration");
    cfg->validate();
  }

  Context ctx;
  ctx.session_id = session_id;
  ctx.schema = deps_.schemas->get(base->question.use_case_id);
  auto& o = ctx.outcome;
  o = *base;
  o.outcome_id = random_id();
  o.session_id = session_id;
  o.parent_outcome_id = base->outcome_id;
  o.imported = false;
  o.schema_fingerprint = ctx.schema->fingerprint;
  if (cfg && mode == RefineMode::prompt) o.llm_config = neural::redacted_json(*cfg);
  o.steps.clear();
  o.status = OutcomeStatus::complete;
  o.failure.reset();

  const json turn_inputs = {{"parent", base->outcome_id}, {"target", to_string(target)}, {"mode", to_string(mode)},
                            {"instruction", instruction}};
  auto turn = begin_step(Stage::refine, turn_inputs);
  turn.note = std::string(to_string(target)) + " refinement (" + std::string(to_string(mode)) + "): " + instruction;

  json event = turn_inputs;
  event["base_outcome_id"] = base->outcome_id;
  auto reject = [&](const std::string& message, std::vector<std::string> diagnostics) {
    for (const auto& call : turn.llm_calls)
      deps_.sessions->append_event(session_id, EventKind::llm_exchange, neural::to_json(call));
    event["status"] = "rejected";
    event["diagnostics"] = diagnostics;
    deps_.sessions->append_event(session_id, EventKind::refinement, event);
    return RefinementError(message, std::move(diagnostics));
  };

  std::vector<StepRecord> base_stages;
  std::vector<StepRecord> base_turns;
  for (const auto& s : base->steps) {
    if (s.stage != Stage::refine) base_stages.push_back(reused(s));
    else if (!s.idle) base_turns.push_back(reused(s));
  }
  auto base_stage = [&](Stage stage) -> std::optional<StepRecord> {
    for (const auto& s : base_stages)
      if (s.stage == stage) return s;
    return std::nullopt;
  };

  const bool curated = base->question.kind == QuestionKind::curated;
  std::optional<catalog::CuratedQuestion> curated_q;
  if (curated) curated_q = deps_.catalog->get_question(base->question.use_case_id, base->question.index);

  try {
    switch (target) {
      case RefineTarget::query: {
        neural::CandidateQuery cand;
        if (mode == RefineMode::manual) {
          cand = {instruction, "manual edit", 1, {}};
        } else {
          try {
            cand = deps_.neural->refine_query(base->query_text, instruction, *ctx.schema,
                                              deps_.sessions->current(session_id).context, *cfg, &turn.llm_calls);
          } catch (const neural::ExtractionError& e) {
            throw reject("refined query could not be extracted", {e.what()});
          }
        }
        cand.attempt = static_cast<int>(base->query_history.size()) + 1;
        cand.diagnostics = query_diagnostics(cand.sparql_text, *ctx.schema);
        if (!cand.diagnostics.empty()) throw reject("refined query is not valid", cand.diagnostics);
        o.query_history.push_back(cand);
        o.query_text = cand.sparql_text;
        o.result.reset();
        o.dataset.reset();
        o.chart.reset();
        o.interpretation.reset();

        auto select = base_stage(Stage::select_or_generate);
        if (select) o.steps.push_back(*select);
        if (execute_and_process(ctx)) {
          if (curated) {
            visualize_curated(ctx, curated_q->chart, curated_interpretation(*curated_q));
          } else if (cfg && deps_.neural) {
            visualize_custom(ctx, *cfg);
          } else {
            visualize_curated(ctx, viz::default_chart(*o.dataset, o.question.text),
                              base->interpretation.value_or(neural::Interpretation{}));
          }
        }
        break;
      }
      case RefineTarget::chart: {
        viz::ChartSpec chart;
        if (mode == RefineMode::manual) {
          auto doc = json::parse(instruction, nullptr, false);
          if (doc.is_discarded()) throw reject("chart specification is not JSON", {"chart specification is not JSON"});
          try {
            chart = viz::chart_from_json(doc);
          } catch (const ValidationError& e) {
            throw reject("chart specification is not valid", e.violations());
          } catch (const std::exception& e) {
            throw reject("chart specification is not valid", {e.what()});
          }
          auto problems = viz::validate_chart(chart, *base->dataset);
          if (!problems.empty()) throw reject("chart does not fit the data", problems);
        } else {
          try {
            chart = deps_.neural->refine_chart(instruction, base->chart.value_or(viz::default_chart(*base->dataset)),
                                               *base->dataset, *cfg, &turn.llm_calls);
          } catch (const ValidationError& e) {
            throw reject("refined chart is not valid", e.violations());
          }
        }
        for (auto stage : {Stage::select_or_generate, Stage::execute, Stage::process})
          if (auto s = base_stage(stage)) o.steps.push_back(*s);
        auto step = begin_step(Stage::visualize_interpret, {{"chart", instruction}});
        o.chart = chart;
        end_step(step, {{"chart", viz::to_json(chart)},
                        {"interpretation", o.interpretation ? neural::to_json(*o.interpretation) : json(nullptr)}});
        o.steps.push_back(std::move(step));
        break;
      }
      case RefineTarget::interpretation: {
        neural::Interpretation interp;
        if (mode == RefineMode::manual) {
          auto doc = json::parse(instruction, nullptr, false);
          if (doc.is_object() && doc.contains("summary")) {
            try {
              interp = neural::interpretation_from_json(doc);
            } catch (const std::exception& e) {
              throw reject("interpretation is not valid", {e.what()});
            }
          } else {
            interp.summary = text::trim(instruction);
          }
          interp.generator = neural::GeneratorKind::manual;
          interp.model_id.clear();
        } else {
          interp = deps_.neural->refine_interpretation(instruction, o.interpretation.value_or(neural::Interpretation{}),
                                                       o.question.text, *base->dataset, *cfg, &turn.llm_calls);
        }
        for (auto stage : {Stage::select_or_generate, Stage::execute, Stage::process})
          if (auto s = base_stage(stage)) o.steps.push_back(*s);
        auto step = begin_step(Stage::visualize_interpret, {{"interpretation", instruction}});
        o.interpretation = interp;
        end_step(step, {{"chart", o.chart ? viz::to_json(*o.chart) : json(nullptr)},
                        {"interpretation", neural::to_json(interp)}});
        o.steps.push_back(std::move(step));
        break;
      }
    }
  } catch (const RefinementError&) {
    throw;
  } catch (const Error& e) {
    throw reject(e.what(), {e.what()});
  }

  for (auto& s : base_turns) o.steps.push_back(std::move(s));
  end_step(turn, {{"query", o.query_text},
                  {"chart", o.chart ? viz::to_json(*o.chart) : json(nullptr)},
                  {"interpretation", o.interpretation ? neural::to_json(*o.interpretation) : json(nullptr)}});
  o.steps.push_back(std::move(turn));

  event["status"] = "applied";
  event["outcome_id"] = o.outcome_id;
  return finish(ctx, &event);
}

}  // namespace compass::pipeline
