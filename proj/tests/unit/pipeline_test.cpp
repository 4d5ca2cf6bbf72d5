#include <gtest/gtest.h>

#include <thread>

#include "compass/common/text.hpp"
#include "support/http_stub.hpp"
#include "support/pipeline_harness.hpp"

using namespace compass;
using namespace compass::pipeline;
using nlohmann::json;

namespace {

constexpr const char* kDecadeQuestion = "Number of empirical studies per decade";
constexpr const char* kVenueQuestion = "Which venues published empirical studies?";
constexpr const char* kToolQuestion = "Which tools did the papers use?";

std::map<std::string, std::int64_t> column_counts(const viz::Dataset& d, const std::string& key,
                                                  const std::string& value) {
  auto k = d.column_index(key);
  auto v = d.column_index(value);
  if (!k || !v) return {};
  std::map<std::string, std::int64_t> out;
  for (const auto& row : d.rows) out[viz::cell_text(row[*k])] = std::get<std::int64_t>(row[*v]);
  return out;
}

const std::map<std::string, std::int64_t> kDecades = {{"1990s", 1}, {"2000s", 2}, {"2010s", 3}, {"2020s", 1}};

void expect_five_stages(const QuestionOutcome& o) {
  ASSERT_GE(o.steps.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(o.steps[i].stage, kStages[i]) << i;
  for (const auto& s : o.steps) EXPECT_GE(s.finished, s.started);
}

std::vector<json> normalized_history(session::SessionStore& store, const std::string& sid) {
  std::vector<json> out;
  for (const auto& o : store.outcomes(sid)) out.push_back(to_json(o));
  return out;
}

}  // namespace

TEST(CuratedWorkflow, FirstKgEmpireQuestion) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto o = h.pipeline->run_curated("kg-empire", 1, sid);
  EXPECT_EQ(o.status, OutcomeStatus::complete);
  ASSERT_TRUE(o.interpretation);
  EXPECT_EQ(o.interpretation->generator, neural::GeneratorKind::curated);
  EXPECT_FALSE(o.interpretation->summary.empty());
  ASSERT_TRUE(o.dataset && o.chart && o.result);
  EXPECT_TRUE(viz::validate_chart(*o.chart, *o.dataset).empty());
  expect_five_stages(o);
  ASSERT_EQ(o.steps.size(), 5u);
  EXPECT_TRUE(o.steps[4].idle);
  EXPECT_EQ(llm_call_count(o), 0u);
  EXPECT_EQ(h.mock->calls(), 0);

  auto events = h.store->events(sid);
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].kind, session::EventKind::question_submitted);
  EXPECT_EQ(events[1].kind, session::EventKind::outcome);
  EXPECT_EQ(events[1].payload["outcome_id"], o.outcome_id);
}

TEST(CuratedWorkflow, EveryCuratedQuestionCompletesWithoutLlm) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  int total = 0;
  for (const char* uc : fixtures::kUseCases) {
    for (const auto& q : h.catalog->list_questions(uc)) {
      auto o = h.pipeline->run_curated(uc, q.index, sid);
      EXPECT_EQ(o.status, OutcomeStatus::complete) << q.id << ": " << (o.failure ? o.failure->message : "");
      expect_five_stages(o);
      ++total;
    }
  }
  EXPECT_EQ(total, 26);
  EXPECT_EQ(h.mock->calls(), 0);
}

TEST(CuratedWorkflow, OutOfRangeIndexFailsBeforeAnyStage) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  EXPECT_THROW(h.pipeline->run_curated("kg-empire", 17, sid), NotFoundError);
  EXPECT_THROW(h.pipeline->run_curated("kg-empire", 0, sid), NotFoundError);
  EXPECT_THROW(h.pipeline->run_curated("kg-empire", 1, "no-such-session"), NotFoundError);
  EXPECT_TRUE(h.store->events(sid).empty());
}

TEST(CuratedWorkflow, EndpointDownFailsExecute) {
  fixtures::PipelineHarness h;
  auto deps = h.pipeline->deps();
  sparql::EndpointConfig dead;
  dead.url = "http://127.0.0.1:9/kg-empire/sparql";
  dead.timeout = std::chrono::milliseconds(500);
  dead.max_retries = 0;
  deps.endpoints["kg-empire"] = dead;
  Pipeline p(deps);
  auto sid = h.store->create_session("u");
  auto o = p.run_curated("kg-empire", 1, sid);
  EXPECT_EQ(o.status, OutcomeStatus::failed);
  ASSERT_TRUE(o.failure);
  EXPECT_EQ(o.failure->stage, Stage::execute);
  EXPECT_EQ(o.failure->code, "endpoint_unreachable");
  ASSERT_EQ(o.steps.size(), 2u);
  EXPECT_TRUE(o.steps[1].error);
  EXPECT_FALSE(o.dataset);
  EXPECT_EQ(h.store->outcomes(sid).size(), 1u);
}

TEST(CuratedWorkflow, InvalidCuratedChartFallsBackWithWarning) {
  fixtures::PipelineHarness h;
  auto questions = h.catalog->list_questions("kg-empire");
  questions[0].chart.kind = viz::ChartKind::bar;
  questions[0].chart.x = viz::XEncoding{"no_such_column"};
  h.catalog->put(h.catalog->descriptor("kg-empire"), questions);
  auto sid = h.store->create_session("u");
  auto o = h.pipeline->run_curated("kg-empire", 1, sid);
  EXPECT_EQ(o.status, OutcomeStatus::complete);
  ASSERT_TRUE(o.chart);
  EXPECT_TRUE(viz::validate_chart(*o.chart, *o.dataset).empty());
  ASSERT_EQ(o.steps[3].warnings.size(), 1u);
  EXPECT_NE(o.steps[3].warnings[0].find("no_such_column"), std::string::npos);
}

TEST(CustomWorkflow, DecadeQuestionMatchesFixtureAggregation) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto o = h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
  ASSERT_EQ(o.status, OutcomeStatus::complete) << (o.failure ? o.failure->message : "");
  expect_five_stages(o);
  ASSERT_TRUE(o.dataset);
  EXPECT_EQ(column_counts(*o.dataset, "decade", "studies"), kDecades);
  ASSERT_TRUE(o.chart);
  EXPECT_EQ(o.chart->kind, viz::ChartKind::bar);
  ASSERT_TRUE(o.interpretation);
  EXPECT_EQ(o.interpretation->generator, neural::GeneratorKind::llm);
  EXPECT_EQ(o.interpretation->generator_label(), "llm(mock-1)");
  ASSERT_TRUE(o.llm_config);
  EXPECT_FALSE(o.llm_config->contains("api_key_ref"));
  ASSERT_EQ(o.query_history.size(), 1u);
  EXPECT_EQ(o.steps[0].llm_calls.size(), 1u);
  EXPECT_EQ(o.steps[3].llm_calls.size(), 2u);

  // no hidden calls: every provider call is recorded once in the trace and the log
  EXPECT_EQ(static_cast<std::size_t>(h.mock->calls()), llm_call_count(o));
  std::size_t logged = 0;
  for (const auto& e : h.store->events(sid)) logged += e.kind == session::EventKind::llm_exchange;
  EXPECT_EQ(logged, llm_call_count(o));
}

TEST(CustomWorkflow, RepeatedRunsHaveIdenticalTraceDigests) {
  fixtures::PipelineHarness h;
  std::set<std::string> digests;
  for (int i = 0; i < 5; ++i) {
    auto sid = h.store->create_session("u");
    auto o = h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
    ASSERT_EQ(o.status, OutcomeStatus::complete);
    digests.insert(trace_digest(o));
  }
  EXPECT_EQ(digests.size(), 1u);
}

TEST(CustomWorkflow, RepairSucceedsOnSecondAttempt) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto o = h.pipeline->run_custom(kVenueQuestion, "kg-empire", sid, fixtures::mock_llm_config());
  ASSERT_EQ(o.status, OutcomeStatus::complete) << (o.failure ? o.failure->message : "");
  ASSERT_EQ(o.query_history.size(), 2u);
  EXPECT_FALSE(o.query_history[0].diagnostics.empty());
  EXPECT_TRUE(o.query_history[1].diagnostics.empty());
  EXPECT_EQ(o.query_history[1].attempt, 2);
  EXPECT_EQ(o.steps[0].llm_calls.size(), 2u);
  EXPECT_EQ(o.steps[0].llm_calls[1].task, "repair-query");
  EXPECT_GT(o.dataset->rows.size(), 0u);
}

TEST(CustomWorkflow, AlwaysInvalidFailsAfterThreeAttempts) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto o = h.pipeline->run_custom(kToolQuestion, "kg-empire", sid, fixtures::mock_llm_config());
  EXPECT_EQ(o.status, OutcomeStatus::failed);
  ASSERT_TRUE(o.failure);
  EXPECT_EQ(o.failure->stage, Stage::select_or_generate);
  EXPECT_EQ(o.failure->code, "repair_exhausted");
  EXPECT_EQ(h.mock->calls(), 3);
  EXPECT_EQ(o.query_history.size(), 3u);
  for (int attempt = 1; attempt <= 3; ++attempt) {
    bool seen = false;
    for (const auto& d : o.failure->diagnostics)
      seen |= d.rfind("attempt " + std::to_string(attempt) + ":", 0) == 0 && d.find("invented_predicate") != std::string::npos;
    EXPECT_TRUE(seen) << attempt;
  }
  ASSERT_EQ(o.steps.size(), 1u);
  EXPECT_TRUE(o.steps[0].error);
}

TEST(CustomWorkflow, ProseOnlyRepliesExhaustRepairs) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto o = h.pipeline->run_custom("What is the meaning of life?", "kg-empire", sid, fixtures::mock_llm_config());
  EXPECT_EQ(o.status, OutcomeStatus::failed);
  EXPECT_EQ(h.mock->calls(), 3);
  ASSERT_TRUE(o.failure);
  EXPECT_EQ(o.failure->diagnostics.size(), 3u);
}

TEST(CustomWorkflow, EmptyQuestionIsRejectedWithoutLlmCall) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  EXPECT_THROW(h.pipeline->run_custom("   ", "kg-empire", sid, fixtures::mock_llm_config()), PreconditionError);
  EXPECT_EQ(h.mock->calls(), 0);
  EXPECT_TRUE(h.store->events(sid).empty());
}

TEST(CustomWorkflow, ClientErrorFromEndpointIsNotRepaired) {
  fixtures::PipelineHarness h;
  fixtures::HttpStub stub([](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("query rejected", "text/plain");
  });
  auto deps = h.pipeline->deps();
  deps.endpoints["kg-empire"].url = stub.base_url("/sparql");
  Pipeline p(deps);
  auto sid = h.store->create_session("u");
  auto o = p.run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
  EXPECT_EQ(o.status, OutcomeStatus::failed);
  ASSERT_TRUE(o.failure);
  EXPECT_EQ(o.failure->stage, Stage::execute);
  EXPECT_EQ(o.failure->code, "endpoint_status");
  EXPECT_EQ(h.mock->calls(), 1);
  EXPECT_EQ(stub.requests().size(), 1u);
}

TEST(CustomWorkflow, SessionContextReachesLaterQuestions) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
  auto o = h.pipeline->run_custom(kVenueQuestion, "kg-empire", sid, fixtures::mock_llm_config());
  ASSERT_EQ(o.status, OutcomeStatus::complete);
  const auto& first = o.steps[0].llm_calls[0];
  // system prompt, earlier exchanges as user/assistant pairs, new question
  EXPECT_GT(first.messages.size(), 2u);
  EXPECT_EQ(first.messages.front().role, neural::Role::system);
}

TEST(CustomWorkflow, UnknownUseCaseIsNotFound) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  EXPECT_THROW(h.pipeline->run_custom(kDecadeQuestion, "nope", sid, fixtures::mock_llm_config()), NotFoundError);
  EXPECT_EQ(h.mock->calls(), 0);
}

// ---- refinement ----

TEST(Refinement, ManualLimitEditRerunsDownstreamStages) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto base = h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
  const auto before = normalized_history(*h.store, sid);
  const int calls_before = h.mock->calls();

  auto o = h.pipeline->refine(sid, base.outcome_id, base.query_text + "\nLIMIT 2", RefineTarget::query,
                              RefineMode::manual);
  EXPECT_EQ(o.status, OutcomeStatus::complete);
  EXPECT_EQ(o.parent_outcome_id, base.outcome_id);
  EXPECT_NE(o.outcome_id, base.outcome_id);
  EXPECT_EQ(o.dataset->rows.size(), 2u);
  expect_five_stages(o);
  EXPECT_TRUE(o.steps[0].reused);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_FALSE(o.steps[i].reused) << i;
  EXPECT_EQ(o.steps.back().stage, Stage::refine);
  EXPECT_FALSE(o.steps.back().idle);
  EXPECT_EQ(o.query_history.size(), 2u);

  // custom base: chart and interpretation are regenerated, and only those calls are new
  EXPECT_EQ(h.mock->calls() - calls_before, 2);
  EXPECT_EQ(o.steps[3].llm_calls.size(), 2u);

  auto after = normalized_history(*h.store, sid);
  ASSERT_EQ(after.size(), 2u);
  EXPECT_EQ(after[0], before[0]);
}

TEST(Refinement, ManualEditOfCuratedKeepsCuratedText) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto base = h.pipeline->run_curated("kg-empire", 1, sid);
  auto o = h.pipeline->refine(sid, base.outcome_id, base.query_text + "\nLIMIT 1", RefineTarget::query,
                              RefineMode::manual);
  EXPECT_EQ(o.status, OutcomeStatus::complete);
  EXPECT_LE(o.dataset->rows.size(), 1u);
  EXPECT_EQ(o.interpretation->generator, neural::GeneratorKind::curated);
  EXPECT_EQ(h.mock->calls(), 0);
}

TEST(Refinement, SyntaxErrorIsRejectedAndHistoryIntact) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto base = h.pipeline->run_curated("kg-empire", 1, sid);
  const auto before = normalized_history(*h.store, sid);
  try {
    h.pipeline->refine(sid, base.outcome_id, "SELECT ?x WHERE { ?x ?p", RefineTarget::query, RefineMode::manual);
    FAIL() << "expected RefinementError";
  } catch (const RefinementError& e) {
    EXPECT_FALSE(e.diagnostics().empty());
    EXPECT_EQ(e.code(), "refinement_error");
  }
  EXPECT_EQ(normalized_history(*h.store, sid), before);
  auto events = h.store->events(sid);
  EXPECT_EQ(events.back().kind, session::EventKind::refinement);
  EXPECT_EQ(events.back().payload["status"], "rejected");
}

TEST(Refinement, SchemaInconsistentManualQueryIsRejected) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto base = h.pipeline->run_curated("kg-empire", 1, sid);
  const std::string bad =
      "PREFIX orkgp: <http://orkg.org/orkg/predicate/>\nSELECT ?p WHERE { ?p orkgp:invented_predicate ?x }";
  EXPECT_THROW(h.pipeline->refine(sid, base.outcome_id, bad, RefineTarget::query, RefineMode::manual),
               RefinementError);
  EXPECT_EQ(h.store->outcomes(sid).size(), 1u);
}

TEST(Refinement, PromptChartRefinementMakesLineChart) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto base = h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
  auto o = h.pipeline->refine(sid, base.outcome_id, "make it a line chart", RefineTarget::chart, RefineMode::prompt);
  ASSERT_TRUE(o.chart);
  EXPECT_EQ(o.chart->kind, viz::ChartKind::line);
  EXPECT_EQ(o.interpretation, base.interpretation);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(o.steps[i].reused);
  EXPECT_FALSE(o.steps[3].reused);
  EXPECT_EQ(o.steps.back().llm_calls.size(), 1u);
  EXPECT_EQ(base.chart->kind, h.store->find_outcome(sid, base.outcome_id)->chart->kind);
}

TEST(Refinement, ManualChartSpecIsValidated) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto base = h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
  auto line = R"({"kind":"line","title":"Per decade","x":{"column":"decade"},"y":[{"column":"studies"}]})";
  auto o = h.pipeline->refine(sid, base.outcome_id, line, RefineTarget::chart, RefineMode::manual);
  EXPECT_EQ(o.chart->kind, viz::ChartKind::line);

  auto bad = R"({"kind":"bar","title":"x","x":{"column":"missing"},"y":[{"column":"studies"}]})";
  EXPECT_THROW(h.pipeline->refine(sid, base.outcome_id, bad, RefineTarget::chart, RefineMode::manual),
               RefinementError);
  EXPECT_THROW(h.pipeline->refine(sid, base.outcome_id, "not json", RefineTarget::chart, RefineMode::manual),
               RefinementError);
}

TEST(Refinement, PromptQueryRefinementFiltersYears) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto base = h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
  auto o = h.pipeline->refine(sid, base.outcome_id, "only count studies from 2000 onwards", RefineTarget::query,
                              RefineMode::prompt);
  ASSERT_EQ(o.status, OutcomeStatus::complete);
  const std::map<std::string, std::int64_t> expected = {{"2000s", 2}, {"2010s", 3}, {"2020s", 1}};
  EXPECT_EQ(column_counts(*o.dataset, "decade", "studies"), expected);
  EXPECT_EQ(o.steps.back().llm_calls[0].task, "refine-query");
}

TEST(Refinement, InterpretationManualAndPrompt) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto base = h.pipeline->run_curated("kg-empire", 1, sid);
  auto manual = h.pipeline->refine(sid, base.outcome_id, "My own reading of the chart.", RefineTarget::interpretation,
                                   RefineMode::manual);
  EXPECT_EQ(manual.interpretation->generator, neural::GeneratorKind::manual);
  EXPECT_EQ(manual.interpretation->summary, "My own reading of the chart.");
  EXPECT_EQ(manual.chart, base.chart);

  auto prompted = h.pipeline->refine(sid, manual.outcome_id, "shorter please", RefineTarget::interpretation,
                                     RefineMode::prompt, fixtures::mock_llm_config());
  EXPECT_EQ(prompted.interpretation->generator, neural::GeneratorKind::llm);
  // both refinement turns are in the trace
  std::size_t turns = 0;
  for (const auto& s : prompted.steps) turns += s.stage == Stage::refine && !s.idle;
  EXPECT_EQ(turns, 2u);
}

TEST(Refinement, PromptModeOnCuratedNeedsConfig) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  auto base = h.pipeline->run_curated("kg-empire", 1, sid);
  EXPECT_THROW(h.pipeline->refine(sid, base.outcome_id, "line chart", RefineTarget::chart, RefineMode::prompt),
               PreconditionError);
  EXPECT_THROW(h.pipeline->refine(sid, "missing", "x", RefineTarget::chart, RefineMode::manual), NotFoundError);
}

TEST(Refinement, ParseNames) {
  EXPECT_EQ(refine_target_from_string("chart"), RefineTarget::chart);
  EXPECT_EQ(refine_mode_from_string("prompt"), RefineMode::prompt);
  EXPECT_THROW(refine_target_from_string("data"), ValidationError);
}

TEST(Concurrency, RunsWithinOneSessionAreSerialized) {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("u");
  std::vector<std::thread> threads;
  for (int i = 1; i <= 6; ++i) threads.emplace_back([&, i] { h.pipeline->run_curated("kg-empire", i, sid); });
  for (auto& t : threads) t.join();
  auto events = h.store->events(sid);
  ASSERT_EQ(events.size(), 12u);
  for (std::size_t i = 0; i < events.size(); i += 2) {
    EXPECT_EQ(events[i].kind, session::EventKind::question_submitted);
    EXPECT_EQ(events[i + 1].kind, session::EventKind::outcome);
    EXPECT_EQ(events[i].payload["index"], events[i + 1].payload["question"]["index"]);
  }
}

TEST(Concurrency, SessionsRunInParallel) {
  fixtures::PipelineHarness h;
  std::vector<std::string> sids;
  for (int i = 0; i < 4; ++i) sids.push_back(h.store->create_session("u"));
  std::vector<std::thread> threads;
  std::atomic<int> complete{0};
  for (const auto& sid : sids)
    threads.emplace_back([&, sid] {
      auto o = h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
      complete += o.status == OutcomeStatus::complete;
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(complete.load(), 4);
}
