#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include "compass/api/service.hpp"
#include "compass/api/statistics.hpp"
#include "compass/common/ids.hpp"
#include "support/pipeline_harness.hpp"

using namespace compass;
using namespace compass::api;
using nlohmann::json;

namespace {

constexpr const char* kDecadeQuestion = "Number of empirical studies per decade";

Timestamp at(const std::string& iso) { return parse_timestamp(iso); }

struct Running {
  fixtures::PipelineHarness harness;
  std::unique_ptr<Service> service;
  std::unique_ptr<httplib::Client> client;

  explicit Running(int limit = kDefaultDailyLimit, bool trusted_proxy = false) {
    ServiceComponents c;
    c.deps = harness.pipeline->deps();
    c.rate_limit = limit;
    c.default_llm = fixtures::mock_llm_config();
    c.trusted_proxy = trusted_proxy;
    c.drain_timeout = std::chrono::milliseconds(2000);
    service = std::make_unique<Service>(std::move(c));
    int port = service->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(30, 0);
  }
  ~Running() { service->stop(); }

  json post(const std::string& path, const json& body, int expected = 200) {
    auto res = client->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res) << path;
    if (!res) return json();
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return json::parse(res->body, nullptr, false);
  }
  json get(const std::string& path, int expected = 200) {
    auto res = client->Get(path);
    EXPECT_TRUE(res) << path;
    if (!res) return json();
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return json::parse(res->body, nullptr, false);
  }
};

}  // namespace

// ---- limiter ----

TEST(RateLimiterTest, BoundaryAtTwentyFive) {
  RateLimiter limiter(25, "mock-1");
  const auto now = at("2026-10-16T12:00:00.000Z");
  for (int i = 1; i <= 25; ++i) {
    auto d = limiter.check_and_consume("10.0.0.1", "mock-1", now);
    ASSERT_TRUE(d.allowed) << i;
    EXPECT_EQ(d.remaining, 25 - i);
  }
  auto denied = limiter.check_and_consume("10.0.0.1", "mock-1", now);
  EXPECT_FALSE(denied.allowed);
  EXPECT_EQ(denied.retry_after, std::chrono::hours(12));
  EXPECT_TRUE(limiter.check_and_consume("10.0.0.1", "other-model", now).allowed);
  EXPECT_TRUE(limiter.check_and_consume("10.0.0.2", "mock-1", now).allowed);
}

TEST(RateLimiterTest, WindowRollsAtUtcMidnight) {
  RateLimiter limiter(2, "m");
  limiter.check_and_consume("k", "m", at("2026-10-16T23:59:58.000Z"));
  limiter.check_and_consume("k", "m", at("2026-10-16T23:59:58.500Z"));
  auto denied = limiter.check_and_consume("k", "m", at("2026-10-16T23:59:59.000Z"));
  EXPECT_FALSE(denied.allowed);
  EXPECT_EQ(denied.retry_after, std::chrono::seconds(1));
  EXPECT_TRUE(limiter.check_and_consume("k", "m", at("2026-10-17T00:00:00.000Z")).allowed);
  EXPECT_EQ(limiter.remaining("k", at("2026-10-17T10:00:00.000Z")), 1);
}

TEST(RateLimiterTest, ExactUnderConcurrency) {
  for (int round = 0; round < 20; ++round) {
    RateLimiter limiter(25, "m");
    std::atomic<int> allowed{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 40; ++i)
      threads.emplace_back([&] { allowed += limiter.check_and_consume("k", "m", now_utc()).allowed; });
    for (auto& t : threads) t.join();
    ASSERT_EQ(allowed.load(), 25);
  }
}

TEST(RateLimiterTest, RetryAfterIsNeverZero) {
  EXPECT_EQ(until_next_utc_midnight(at("2026-10-16T00:00:00.000Z")), std::chrono::hours(24));
  EXPECT_EQ(until_next_utc_midnight(at("2026-10-16T23:59:59.999Z")), std::chrono::seconds(1));
}

// ---- statistics ----

TEST(StatisticsTest, FreshInstallAndCounts) {
  fixtures::PipelineHarness h;
  auto fresh = compute_statistics(*h.catalog, *h.store);
  ASSERT_EQ(fresh.use_cases.size(), 2u);
  EXPECT_EQ(fresh.use_cases[0].use_case_id, "kg-empire");
  EXPECT_EQ(fresh.use_cases[0].curated_questions, 16u);
  EXPECT_EQ(fresh.use_cases[1].curated_questions, 10u);
  for (const auto& s : fresh.use_cases) {
    EXPECT_EQ(s.curated_executions, 0u);
    EXPECT_EQ(s.custom_questions, 0u);
    EXPECT_FALSE(s.success_rate);
  }

  auto sid = h.store->create_session("u");
  auto curated = h.pipeline->run_curated("kg-empire", 1, sid);
  auto st = compute_statistics(*h.catalog, *h.store);
  EXPECT_EQ(st.use_cases[0].curated_executions, 1u);

  h.pipeline->run_custom("Which tools did the papers use?", "kg-empire", sid, fixtures::mock_llm_config());
  st = compute_statistics(*h.catalog, *h.store);
  EXPECT_EQ(st.use_cases[0].custom_questions, 1u);
  ASSERT_TRUE(st.use_cases[0].success_rate);
  EXPECT_DOUBLE_EQ(*st.use_cases[0].success_rate, 0.0);

  h.pipeline->run_custom(kDecadeQuestion, "kg-empire", sid, fixtures::mock_llm_config());
  h.pipeline->refine(sid, curated.outcome_id, "Mine.", pipeline::RefineTarget::interpretation,
                     pipeline::RefineMode::manual);
  st = compute_statistics(*h.catalog, *h.store);
  EXPECT_EQ(st.use_cases[0].curated_executions, 1u);
  EXPECT_EQ(st.use_cases[0].custom_questions, 2u);
  EXPECT_DOUBLE_EQ(*st.use_cases[0].success_rate, 0.5);
  EXPECT_EQ(to_json(st), to_json(compute_statistics(*h.catalog, *h.store)));
}

// ---- HTTP ----

TEST(ServiceTest, FortyConcurrentRequestsAdmitExactlyTwentyFive) {
  Running r;
  std::atomic<int> ok{0}, denied{0}, other{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 40; ++i) {
    threads.emplace_back([&] {
      httplib::Client c("127.0.0.1", r.service->port());
      c.set_read_timeout(30, 0);
      auto res = c.Post("/use-cases/kg-empire/custom/run", json{{"question", kDecadeQuestion}}.dump(),
                        "application/json");
      if (!res) {
        ++other;
      } else if (res->status == 200) {
        ++ok;
      } else if (res->status == 429) {
        EXPECT_TRUE(res->has_header("Retry-After"));
        EXPECT_GT(std::stoi(res->get_header_value("Retry-After")), 0);
        auto body = json::parse(res->body);
        EXPECT_EQ(body["code"], "rate_limited");
        EXPECT_FALSE(body["correlation_id"].get<std::string>().empty());
        ++denied;
      } else {
        ++other;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 25);
  EXPECT_EQ(denied.load(), 15);
  EXPECT_EQ(other.load(), 0);

  // a non-default model is not subject to this limit
  auto body = r.post("/use-cases/kg-empire/custom/run",
                     {{"question", kDecadeQuestion}, {"llm", {{"provider_id", "mock"}, {"model_id", "mock-2"}}}});
  EXPECT_EQ(body["outcome"]["status"], "complete");
}

TEST(ServiceTest, ForwardedForNeedsTrustedProxyFlag) {
  for (bool trusted : {false, true}) {
    Running r(1, trusted);
    auto send = [&](const std::string& ip) {
      httplib::Headers headers = {{"X-Forwarded-For", ip + ", 10.0.0.99"}};
      return r.client->Post("/use-cases/kg-empire/custom/run", headers, json{{"question", kDecadeQuestion}}.dump(),
                            "application/json");
    };
    auto first = send("203.0.113.7");
    auto second = send("203.0.113.8");
    ASSERT_TRUE(first && second);
    EXPECT_EQ(first->status, 200);
    EXPECT_EQ(second->status, trusted ? 200 : 429) << "trusted=" << trusted;
  }
}

TEST(ServiceTest, ApiDescriptionCoversEveryRoute) {
  Running r;
  auto doc = r.get("/api-description");
  ASSERT_TRUE(doc.contains("paths"));
  for (const auto& route : r.service->routes()) {
    auto method = route.method == "GET" ? "get" : "post";
    ASSERT_TRUE(doc["paths"].contains(route.path)) << route.path;
    EXPECT_TRUE(doc["paths"][route.path].contains(method)) << route.method << " " << route.path;
  }
  const std::set<std::pair<std::string, std::string>> required = {
      {"get", "/use-cases"},
      {"get", "/use-cases/{id}/schema"},
      {"get", "/use-cases/{id}/questions"},
      {"post", "/use-cases/{id}/questions/{index}/run"},
      {"post", "/use-cases/{id}/custom/run"},
      {"post", "/sessions/{id}/refine"},
      {"get", "/sessions/{id}/history"},
      {"post", "/sessions/{id}/events/{event_id}/retained"},
      {"get", "/sessions/{id}/export/{outcome_id}"},
      {"post", "/import"},
      {"get", "/statistics"},
      {"get", "/api-description"},
  };
  for (const auto& [method, path] : required)
    EXPECT_TRUE(doc["paths"].contains(path) && doc["paths"][path].contains(method)) << method << " " << path;

  // every described route is actually served (no route-level 404)
  for (const auto& route : r.service->routes()) {
    std::string path = route.path;
    for (const auto& [from, to] : std::vector<std::pair<std::string, std::string>>{
             {"{id}", "kg-empire"}, {"{index}", "1"}, {"{event_id}", "evt-000001"}, {"{outcome_id}", "x"}}) {
      if (auto pos = path.find(from); pos != std::string::npos) path.replace(pos, from.size(), to);
    }
    auto res = route.method == "GET" ? r.client->Get(path) : r.client->Post(path, "{}", "application/json");
    ASSERT_TRUE(res) << path;
    if (res->status == 404) {
      EXPECT_NE(json::parse(res->body)["code"], "route_not_found") << path;
    }
  }
}

TEST(ServiceTest, UnknownRouteHasStructuredBody) {
  Running r;
  auto body = r.get("/no/such/route", 404);
  EXPECT_EQ(body["code"], "route_not_found");
  EXPECT_TRUE(body.contains("message"));
  EXPECT_FALSE(body["correlation_id"].get<std::string>().empty());
  auto missing = r.get("/use-cases/nope/questions", 404);
  EXPECT_EQ(missing["code"], "not_found");
  auto out_of_range = r.post("/use-cases/kg-empire/questions/17/run", json::object(), 404);
  EXPECT_EQ(out_of_range["code"], "not_found");
  auto bad = r.client->Post("/use-cases/kg-empire/custom/run", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
}

TEST(ServiceTest, CatalogRoutes) {
  Running r;
  auto use_cases = r.get("/use-cases");
  ASSERT_EQ(use_cases.size(), 2u);
  EXPECT_EQ(use_cases[0]["question_count"], 16);
  EXPECT_EQ(use_cases[1]["question_count"], 10);
  auto questions = r.get("/use-cases/nlp4re-id-card/questions");
  EXPECT_EQ(questions.size(), 10u);
  auto schema = r.get("/use-cases/kg-empire/schema");
  EXPECT_EQ(schema["fingerprint"], use_cases[0]["schema_fingerprint"]);
}

TEST(ServiceTest, CuratedRunHistoryExportImport) {
  Running r;
  auto run = r.post("/use-cases/kg-empire/questions/1/run", json::object());
  EXPECT_EQ(run["outcome"]["status"], "complete");
  EXPECT_EQ(run["outcome"]["interpretation"]["generator"], "curated");
  EXPECT_TRUE(run["chart_document"].is_object());
  const auto sid = run["session_id"].get<std::string>();
  const auto oid = run["outcome"]["outcome_id"].get<std::string>();

  auto history = r.get("/sessions/" + sid + "/history");
  ASSERT_EQ(history["events"].size(), 2u);
  EXPECT_EQ(history["owner"], "127.0.0.1");

  auto res = r.client->Get("/sessions/" + sid + "/export/" + oid);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  EXPECT_NE(res->get_header_value("Content-Disposition").find(".cqbundle.json"), std::string::npos);
  auto bundle = json::parse(res->body);
  EXPECT_TRUE(bundle["prompt_transcript"].empty());

  auto imported = r.client->Post("/import", res->body, "application/json");
  ASSERT_TRUE(imported);
  EXPECT_EQ(imported->status, 201);
  auto body = json::parse(imported->body);
  EXPECT_TRUE(body["warnings"].empty());
  auto copy = r.get("/sessions/" + body["session_id"].get<std::string>() + "/history");
  EXPECT_EQ(copy["events"].back()["kind"], "outcome");

  bundle["dataset"]["rows"][0][0] = "tampered";
  auto tampered = r.client->Post("/import", bundle.dump(), "application/json");
  ASSERT_TRUE(tampered);
  EXPECT_EQ(tampered->status, 422);
  EXPECT_EQ(json::parse(tampered->body)["code"], "integrity_error");

  r.get("/sessions/" + sid + "/export/missing", 404);
}

TEST(ServiceTest, CustomRunRefineRetainRestore) {
  Running r;
  auto session = r.post("/sessions", json::object(), 201);
  const auto sid = session["session_id"].get<std::string>();
  auto run = r.post("/use-cases/kg-empire/custom/run", {{"question", kDecadeQuestion}, {"session_id", sid}});
  ASSERT_EQ(run["outcome"]["status"], "complete");
  const auto oid = run["outcome"]["outcome_id"].get<std::string>();

  auto rejected = r.post("/sessions/" + sid + "/refine",
                         {{"outcome_id", oid}, {"instruction", "SELECT ?x WHERE {"}, {"target", "query"}, {"mode", "manual"}},
                         422);
  EXPECT_EQ(rejected["code"], "refinement_error");
  EXPECT_FALSE(rejected["diagnostics"].empty());

  auto refined = r.post("/sessions/" + sid + "/refine",
                        {{"outcome_id", oid}, {"instruction", "make it a line chart"}, {"target", "chart"}, {"mode", "prompt"}});
  EXPECT_EQ(refined["outcome"]["chart"]["kind"], "line");
  EXPECT_EQ(refined["outcome"]["parent_outcome_id"], oid);

  auto history = r.get("/sessions/" + sid + "/history");
  const auto context_before = history["context"].size();
  std::string exchange_id;
  for (const auto& e : history["events"])
    if (e["kind"] == "llm-exchange") {
      exchange_id = e["event_id"];
      break;
    }
  ASSERT_FALSE(exchange_id.empty());
  auto ack = r.post("/sessions/" + sid + "/events/" + exchange_id + "/retained", {{"retained", false}});
  EXPECT_EQ(ack["retained"], false);
  auto after = r.get("/sessions/" + sid + "/history");
  EXPECT_EQ(after["context"].size(), context_before - 2);
  EXPECT_EQ(after["events"].size(), history["events"].size());
  r.post("/sessions/" + sid + "/events/" + exchange_id + "/retained", {{"retained", "no"}}, 400);

  auto restored = r.get("/sessions/" + sid + "/restore/evt-000001");
  EXPECT_EQ(restored["events"].size(), 1u);
  EXPECT_TRUE(restored["outcomes"].empty());
  r.get("/sessions/" + sid + "/restore/evt-999999", 404);
}

TEST(ServiceTest, StatisticsRoute) {
  Running r;
  auto fresh = r.get("/statistics");
  EXPECT_EQ(fresh["use_cases"][0]["curated_questions"], 16);
  EXPECT_EQ(fresh["use_cases"][1]["curated_questions"], 10);
  EXPECT_EQ(fresh["use_cases"][0]["curated_executions"], 0);
  r.post("/use-cases/kg-empire/questions/2/run", json::object());
  EXPECT_EQ(r.get("/statistics")["use_cases"][0]["curated_executions"], 1);
}

TEST(ServiceTest, UnknownProviderIsRejectedWithoutConsumingQuota) {
  Running r(1);
  auto body = r.post("/use-cases/kg-empire/custom/run",
                     {{"question", kDecadeQuestion}, {"llm", {{"provider_id", "nope"}, {"model_id", "mock-1"}}}}, 400);
  EXPECT_EQ(body["code"], "validation_failed");
  r.post("/use-cases/kg-empire/custom/run", {{"question", " "}}, 400);
  r.post("/use-cases/kg-empire/custom/run", {{"question", kDecadeQuestion}});
}

TEST(ServiceTest, StopRefusesNewConnections) {
  Running r;
  r.get("/health");
  r.service->stop();
  httplib::Client c("127.0.0.1", r.service->port());
  c.set_connection_timeout(1, 0);
  EXPECT_FALSE(c.Get("/health"));
}

TEST(ServiceTest, BusyPortIsAStartupError) {
  Running r;
  ServiceComponents c;
  c.deps = r.harness.pipeline->deps();
  c.default_llm = fixtures::mock_llm_config();
  Service second(std::move(c));
  EXPECT_THROW(second.start("127.0.0.1", r.service->port()), ConfigError);
}

// ---- configuration ----

TEST(ServiceConfigTest, MissingCatalogNamesPath) {
  auto cfg = load_service_config(fixtures::config_path("service.offline.json"));
  cfg.use_cases[0].catalog_path = "/nonexistent/kg-empire.catalog.json";
  try {
    build_components(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/kg-empire.catalog.json"), std::string::npos);
  }
}

TEST(ServiceConfigTest, ShippedConfigsLoad) {
  auto online = load_service_config(fixtures::config_path("service.json"));
  EXPECT_EQ(online.use_cases.size(), 2u);
  EXPECT_EQ(online.rate_limit, 25);
  EXPECT_TRUE(online.providers.empty());
  EXPECT_EQ(online.use_cases[0].endpoint.url, "https://orkg.org/triplestore");

  auto offline = load_service_config(fixtures::config_path("service.offline.json"));
  ASSERT_TRUE(offline.fixture_endpoint);
  std::unique_ptr<sparql::FixtureEndpoint> fixture;
  auto components = build_components(offline, &fixture);
  ASSERT_TRUE(fixture);
  Service service(std::move(components));
  int port = service.start();
  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(30, 0);
  auto res = c.Post("/use-cases/kg-empire/custom/run", json{{"question", kDecadeQuestion}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["outcome"]["status"], "complete");
  service.stop();
}

TEST(ServiceConfigTest, InvalidConfigs) {
  EXPECT_THROW(service_config_from_json(json::array()), ConfigError);
  EXPECT_THROW(service_config_from_json({{"use_cases", json::array()}}), ConfigError);
  EXPECT_THROW(service_config_from_json({{"port", 70000}, {"use_cases", json::array()}}), ConfigError);
  EXPECT_THROW(load_service_config("/nonexistent/service.json"), ConfigError);
  auto cfg = load_service_config(fixtures::config_path("service.offline.json"));
  cfg.default_provider = "missing";
  EXPECT_THROW(build_components(cfg, nullptr), ConfigError);
}

TEST(ServiceConfigTest, FileBackedSessionsSurviveRestart) {
  auto dir = std::filesystem::temp_directory_path() / ("compass-api-" + random_id());
  auto cfg = load_service_config(fixtures::config_path("service.offline.json"));
  cfg.data_dir = dir.string();
  json before;
  {
    std::unique_ptr<sparql::FixtureEndpoint> fixture;
    auto components = build_components(cfg, &fixture);
    auto store = components.deps.sessions;
    pipeline::Pipeline p(components.deps);
    auto sid = store->create_session("u");
    p.run_curated("kg-empire", 3, sid);
    before = store->snapshot();
  }
  std::unique_ptr<sparql::FixtureEndpoint> fixture;
  auto components = build_components(cfg, &fixture);
  EXPECT_EQ(components.deps.sessions->snapshot(), before);
  std::filesystem::remove_all(dir);
}
