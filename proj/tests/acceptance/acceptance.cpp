// One PASS/FAIL line per primary acceptance criterion. Exit status is the
// number of failed criteria.

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "compass/api/service.hpp"
#include "compass/common/digest.hpp"
#include "compass/common/ids.hpp"
#include "compass/session/bundle.hpp"
#include "compass/sparql/results.hpp"
#include "support/oracles.hpp"
#include "support/pipeline_harness.hpp"

using namespace compass;
using nlohmann::json;

namespace {

constexpr const char* kDecadeQuestion = "Number of empirical studies per decade";
constexpr const char* kOrkgp = "http://orkg.org/orkg/predicate/";

struct Failed {
  std::string what;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw Failed{what};
}

template <typename T>
std::string str(const T& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---- catalog fidelity ----

void catalog_fidelity() {
  auto schemas = fixtures::shipped_schemas();
  auto catalog = fixtures::shipped_catalog(schemas);
  check(catalog->list_questions("kg-empire").size() == 16,
        "kg-empire has " + str(catalog->list_questions("kg-empire").size()) + " pairs");
  check(catalog->list_questions("nlp4re-id-card").size() == 10,
        "nlp4re-id-card has " + str(catalog->list_questions("nlp4re-id-card").size()) + " pairs");
  for (const char* uc : fixtures::kUseCases) {
    auto violations = catalog->validate_catalog(uc);
    check(violations.empty(), std::string(uc) + ": " + str(violations.size()) + " violations");
  }
}

// ---- workflow 1 ----

void workflow_curated() {
  fixtures::PipelineHarness h;
  std::size_t runs = 0;
  for (const char* uc : fixtures::kUseCases) {
    for (const auto& q : h.catalog->list_questions(uc)) {
      auto sid = h.store->create_session("acceptance");
      auto o = h.pipeline->run_curated(uc, q.index, sid);
      const auto label = std::string(uc) + "#" + str(q.index);
      check(o.status == pipeline::OutcomeStatus::complete,
            label + " " + (o.failure ? o.failure->message : "not complete"));
      check(pipeline::llm_call_count(o) == 0, label + " made LLM calls");
      check(o.steps.size() >= 5, label + " has " + str(o.steps.size()) + " steps");
      for (std::size_t i = 0; i < 5; ++i) check(o.steps[i].stage == pipeline::kStages[i], label + " stage order");
      ++runs;
    }
  }
  check(runs == 26, "ran " + str(runs) + " questions");
  check(h.mock->calls() == 0, "provider called " + str(h.mock->calls()) + " times");
}

// ---- workflow 2 ----

// Decade counts of distinct empirical papers, read straight off the triples.
std::map<std::string, std::int64_t> brute_force_decades(const sparql::TripleStore& g) {
  const std::string p_type = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
  const std::string paper_class = "http://orkg.org/orkg/class/Paper";
  const std::string p_year = std::string(kOrkgp) + "P29";
  const std::string p_contrib = std::string(kOrkgp) + "P31";
  const std::string p_empirical = std::string(kOrkgp) + "is_empirical";
  const auto& ts = g.triples();
  std::map<std::string, std::int64_t> out;
  for (const auto& t : ts) {
    if (t.predicate.value != p_type || t.object.value != paper_class) continue;
    const auto& paper = t.subject;
    std::set<std::string> years;
    bool empirical = false;
    for (const auto& u : ts) {
      if (!(u.subject == paper)) continue;
      if (u.predicate.value == p_year) years.insert(u.object.value);
      if (u.predicate.value != p_contrib) continue;
      for (const auto& w : ts)
        if (w.subject == u.object && w.predicate.value == p_empirical && w.object.value == "true") empirical = true;
    }
    if (!empirical) continue;
    std::set<std::string> decades;
    for (const auto& y : years) {
      const long v = std::stol(y);
      decades.insert(std::to_string(v - v % 10) + "s");
    }
    for (const auto& d : decades) ++out[d];
  }
  return out;
}

void workflow_custom() {
  const std::map<std::string, std::int64_t> expected = {{"1990s", 1}, {"2000s", 2}, {"2010s", 3}, {"2020s", 1}};
  auto oracle = brute_force_decades(*fixtures::shipped_graph("kg-empire"));
  check(oracle == expected, "fixture brute force disagrees with the expected counts");

  fixtures::PipelineHarness h;
  std::set<std::string> digests;
  for (int run = 0; run < 5; ++run) {
    auto sid = h.store->create_session("acceptance");
    auto o = h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
    check(o.status == pipeline::OutcomeStatus::complete, o.failure ? o.failure->message : "not complete");
    check(o.dataset.has_value(), "no dataset");
    auto k = o.dataset->column_index("decade");
    auto v = o.dataset->column_index("studies");
    check(k && v, "missing decade/studies columns");
    std::map<std::string, std::int64_t> got;
    for (const auto& row : o.dataset->rows) got[viz::cell_text(row[*k])] = std::get<std::int64_t>(row[*v]);
    check(got == oracle, "decade counts differ on run " + str(run + 1));
    digests.insert(pipeline::trace_digest(o));
  }
  check(digests.size() == 1, str(digests.size()) + " distinct trace digests");
}

// ---- repair loop ----

void repair_loop() {
  fixtures::PipelineHarness h;
  auto sid = h.store->create_session("acceptance");
  auto ok = h.pipeline->run_custom("Which venues published empirical studies?", "kg-empire", sid,
                                   fixtures::mock_llm_config());
  check(ok.status == pipeline::OutcomeStatus::complete, "invalid-then-valid did not complete");
  check(ok.query_history.size() == 2 && ok.query_history[1].attempt == 2, "did not succeed on attempt 2");
  check(!ok.query_history[0].diagnostics.empty(), "first attempt has no diagnostics");

  const int before = h.mock->calls();
  auto bad = h.pipeline->run_custom("Which tools did the papers use?", "kg-empire", sid, fixtures::mock_llm_config());
  check(bad.status == pipeline::OutcomeStatus::failed, "always-invalid did not fail");
  check(h.mock->calls() - before == 3, "always-invalid made " + str(h.mock->calls() - before) + " calls");
  check(bad.query_history.size() == 3, "history has " + str(bad.query_history.size()) + " attempts");
  for (const auto& attempt : bad.query_history) check(!attempt.diagnostics.empty(), "attempt without diagnostics");
  check(bad.failure && bad.failure->code == "repair_exhausted", "wrong failure code");
  check(bad.failure->diagnostics.size() >= 3, "diagnostic history is incomplete");
}

// ---- export / import ----

void export_import() {
  fixtures::PipelineHarness h;
  std::mt19937_64 rng(20261016);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  std::vector<std::pair<std::string, std::string>> outcomes;  // session, outcome
  while (outcomes.size() < 20) {
    auto sid = h.store->create_session("acceptance");
    const auto kind = pick(4);
    pipeline::QuestionOutcome o;
    if (kind == 0) {
      o = h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
    } else if (kind == 1) {
      auto base = h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
      o = h.pipeline->refine(sid, base.outcome_id, "make it a line chart", pipeline::RefineTarget::chart,
                             pipeline::RefineMode::prompt);
    } else {
      const char* uc = fixtures::kUseCases[pick(2)];
      const auto n = h.catalog->list_questions(uc).size();
      o = h.pipeline->run_curated(uc, pick(n) + 1, sid);
    }
    outcomes.emplace_back(sid, o.outcome_id);
  }

  const std::string replacements = "0123456789abcdefXYZ\"{}[],:.- ";
  std::size_t tampers = 0;
  for (const auto& [sid, oid] : outcomes) {
    auto bundle = session::export_bundle(*h.store, sid, oid);
    auto text = bundle.dump();
    auto imported = session::import_bundle(*h.store, *h.schemas, text, "acceptance");
    check(imported.warnings.empty(), "import warned for " + oid);
    auto again = session::export_bundle(*h.store, imported.session_id, imported.outcome_id);
    check(json_digest(session::normalized_bundle(again)) == json_digest(session::normalized_bundle(bundle)),
          "re-export digest differs for " + oid);

    check(!bundle["dataset"].is_null(), "bundle without dataset for " + oid);
    const auto dataset = bundle["dataset"].dump();
    const auto start = text.find(dataset);
    check(start != std::string::npos, "dataset bytes not located");
    for (int trial = 0; trial < 10; ++trial) {
      auto tampered = text;
      const auto pos = start + pick(dataset.size());
      char c;
      do c = replacements[pick(replacements.size())];
      while (c == tampered[pos]);
      tampered[pos] = c;
      bool rejected = false;
      try {
        session::import_bundle(*h.store, *h.schemas, tampered, "acceptance");
      } catch (const session::IntegrityError&) {
        rejected = true;
      }
      check(rejected, "tampered byte " + str(pos) + " accepted for " + oid);
      ++tampers;
    }
  }
  check(tampers == 200, "ran " + str(tampers) + " tamper trials");
}

// ---- rate limiter ----

void rate_limiter() {
  fixtures::PipelineHarness h;
  api::ServiceComponents c;
  c.deps = h.pipeline->deps();
  c.rate_limit = api::kDefaultDailyLimit;
  c.default_llm = fixtures::mock_llm_config();
  api::Service service(std::move(c));
  const int port = service.start();
  check(api::kDefaultDailyLimit == 25, "limit is " + str(api::kDefaultDailyLimit));

  auto post = [&](const json& body) {
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(30, 0);
    return client.Post("/use-cases/kg-empire/custom/run", body.dump(), "application/json");
  };
  std::atomic<int> allowed{0}, denied{0}, other{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 40; ++i) {
    threads.emplace_back([&] {
      auto res = post({{"question", kDecadeQuestion}});
      if (res && res->status == 200)
        ++allowed;
      else if (res && res->status == 429 && res->has_header("Retry-After"))
        ++denied;
      else
        ++other;
    });
  }
  for (auto& t : threads) t.join();
  std::string other_model;
  for (int i = 0; i < 5; ++i) {
    auto res = post({{"question", kDecadeQuestion}, {"llm", {{"provider_id", "mock"}, {"model_id", "mock-2"}}}});
    if (!res || res->status != 200) other_model = "non-default model request " + str(i + 1) + " denied";
  }
  service.stop();
  check(allowed == 25 && denied == 15 && other == 0,
        "allowed " + str(allowed.load()) + ", denied " + str(denied.load()) + ", other " + str(other.load()));
  check(other_model.empty(), other_model);
}

// ---- SPARQL results decoding ----

void results_decoding() {
  std::size_t docs = 0;
  for (const auto& entry : std::filesystem::directory_iterator(fixtures::data_path("results"))) {
    if (entry.path().extension() != ".srj") continue;
    auto decoded = sparql::decode_results(fixtures::read_file(entry.path().string()));
    auto encoded = sparql::encode_results(decoded);
    check(sparql::decode_results(encoded) == decoded, entry.path().filename().string() + " is not lossless");
    check(sparql::encode_results(sparql::decode_results(encoded)) == encoded,
          entry.path().filename().string() + " re-encoding is unstable");
    ++docs;
  }
  check(docs >= 10, "only " + str(docs) + " documents");
}

// ---- aggregation oracle ----

void aggregation_oracle() {
  std::mt19937_64 rng(42);
  const std::vector<std::string> groups = {"g_str", "g_int", "g_dec", "g_bool", "g_date"};
  const std::vector<std::string> measures = {"", "m_int", "m_dec"};
  const std::vector<viz::AggregateKind> kinds = {viz::AggregateKind::count, viz::AggregateKind::sum,
                                                 viz::AggregateKind::avg, viz::AggregateKind::min,
                                                 viz::AggregateKind::max};
  for (int i = 0; i < 200; ++i) {
    auto d = fixtures::random_dataset(rng, 100);
    check(d.rows.size() <= 100, "dataset too large");
    for (const auto& g : groups) {
      for (auto binning : {viz::Binning::none, viz::Binning::decade}) {
        if (binning == viz::Binning::decade && g == "g_bool") continue;
        for (auto kind : kinds) {
          for (const auto& m : measures) {
            viz::GroupSpec gs{g, binning};
            if (m.empty() && kind != viz::AggregateKind::count) continue;
            viz::MeasureSpec ms{kind, m, ""};
            check(viz::aggregate(d, gs, ms) == fixtures::reference_aggregate(d, gs, ms),
                  "dataset " + str(i) + " group " + g + " measure " + m);
          }
        }
      }
    }
  }
}

// ---- append-only history ----

void append_only() {
  const auto dir = std::filesystem::temp_directory_path() / ("compass-acceptance-" + random_id());
  std::filesystem::create_directories(dir);
  const auto path = (dir / "sessions.jsonl").string();
  std::mt19937 rng(1016);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  json before;
  {
    session::SessionStore store(std::make_shared<session::FileBackend>(path));
    std::map<std::string, std::vector<std::string>> model;  // session -> event ids in order
    std::vector<std::string> live;
    for (int op = 0; op < 1500; ++op) {
      const auto choice = pick(100);
      if (live.empty() || choice < 5) {
        live.push_back(store.create_session("owner"));
        model[live.back()];
      } else {
        const auto& sid = live[pick(live.size())];
        auto& ids = model[sid];
        if (choice < 75 || ids.empty()) {
          ids.push_back(store.append_event(sid, session::EventKind::note, {{"op", op}}));
        } else {
          store.set_retained(sid, ids[pick(ids.size())], choice % 2 == 0);
        }
      }
      if (op % 50 == 0) {
        for (const auto& [sid, ids] : model) {
          auto events = store.events(sid);
          check(events.size() == ids.size(), "event count changed in " + sid);
          for (std::size_t i = 0; i < ids.size(); ++i)
            check(events[i].event_id == ids[i], "event reordered in " + sid);
        }
      }
    }
    before = store.snapshot();
  }
  session::SessionStore reopened(std::make_shared<session::FileBackend>(path));
  const bool same = reopened.snapshot() == before;
  std::filesystem::remove_all(dir);
  check(same, "state after restart differs");
}

struct Criterion {
  std::string name;
  std::chrono::milliseconds limit;
  std::function<void()> run;
};

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::off);
  using std::chrono::milliseconds;
  const std::vector<Criterion> criteria = {
      {"catalog-fidelity", milliseconds(5000), catalog_fidelity},
      {"workflow-1-curated", milliseconds(30000), workflow_curated},
      {"workflow-2-determinism", milliseconds(5000), workflow_custom},
      {"repair-loop", milliseconds(2000), repair_loop},
      {"export-import-round-trip", milliseconds(10000), export_import},
      {"rate-limiter-exactness", milliseconds(5000), rate_limiter},
      {"sparql-results-decoding", milliseconds(1000), results_decoding},
      {"aggregation-oracle", milliseconds(10000), aggregation_oracle},
      {"append-only-history", milliseconds(30000), append_only},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    std::string detail;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run();
    } catch (const Failed& f) {
      detail = f.what;
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const auto ms = std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() - t0);
    if (detail.empty() && ms > c.limit) detail = "over time limit";
    if (!detail.empty()) ++failed;
    std::cout << (detail.empty() ? "PASS" : "FAIL") << "  " << c.name << "  " << ms.count() << " ms (limit "
              << c.limit.count() << " ms)";
    if (!detail.empty()) std::cout << "  " << detail;
    std::cout << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed;
}
