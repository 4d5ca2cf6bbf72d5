#include "compass/api/service.hpp"

#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>

#include <spdlog/spdlog.h>

#include "compass/api/statistics.hpp"
#include "compass/common/ids.hpp"
#include "compass/common/text.hpp"
#include "compass/session/bundle.hpp"

namespace compass::api {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- configuration ----

namespace {

std::string resolve_path(const std::string& base_dir, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

sparql::EndpointConfig endpoint_from_json(const json& doc) {
  sparql::EndpointConfig ep;
  ep.url = doc.value("url", std::string{});
  ep.timeout = std::chrono::milliseconds(doc.value("timeout_ms", 30000));
  ep.max_retries = doc.value("max_retries", 2);
  const auto method = doc.value("method", std::string("post"));
  if (method == "get") ep.method = sparql::HttpMethod::get;
  else if (method == "post") ep.method = sparql::HttpMethod::post;
  else throw ConfigError("endpoint method must be 'get' or 'post', got '" + method + "'");
  return ep;
}

}  // namespace

ServiceConfig service_config_from_json(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw ConfigError("service config must be a JSON object");
  ServiceConfig c;
  try {
    c.host = doc.value("host", c.host);
    c.port = doc.value("port", c.port);
    c.data_dir = resolve_path(base_dir, doc.value("data_dir", std::string{}));
    c.rate_limit = doc.value("rate_limit", c.rate_limit);
    c.cache_ttl = std::chrono::milliseconds(doc.value("cache_ttl_ms", 0));
    c.drain_timeout = std::chrono::milliseconds(doc.value("drain_timeout_ms", 10000));
    c.trusted_proxy = doc.value("trusted_proxy", false);
    c.fixture_endpoint = doc.value("fixture_endpoint", false);
    if (auto llm = doc.find("llm"); llm != doc.end()) {
      c.default_provider = llm->value("default_provider", c.default_provider);
      c.default_model = llm->value("default_model", c.default_model);
      c.secrets_file = resolve_path(base_dir, llm->value("secrets_file", std::string{}));
      for (const auto& p : llm->value("providers", json::array())) {
        auto s = neural::ProviderSettings::from_json(p);
        s.transcript_path = resolve_path(base_dir, s.transcript_path);
        c.providers.push_back(std::move(s));
      }
    }
    for (const auto& u : doc.at("use_cases")) {
      UseCaseConfig uc;
      uc.id = u.at("id").get<std::string>();
      uc.schema_path = resolve_path(base_dir, u.at("schema").get<std::string>());
      uc.catalog_path = resolve_path(base_dir, u.at("catalog").get<std::string>());
      uc.graph_path = resolve_path(base_dir, u.value("graph", std::string{}));
      uc.endpoint = endpoint_from_json(u.value("endpoint", json::object()));
      c.use_cases.push_back(std::move(uc));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid service config: ") + e.what());
  }
  if (c.port < 0 || c.port > 65535) throw ConfigError("port must be within 0..65535");
  if (c.use_cases.empty()) throw ConfigError("service config lists no use cases");
  return c;
}

ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read service config '" + path + "'");
  auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("service config '" + path + "' is not valid JSON");
  auto c = service_config_from_json(doc, fs::absolute(path).parent_path().string());
  if (const char* model = std::getenv("COMPASS_DEFAULT_MODEL"); model && *model) c.default_model = model;
  if (const char* provider = std::getenv("COMPASS_DEFAULT_PROVIDER"); provider && *provider)
    c.default_provider = provider;
  return c;
}

ServiceComponents build_components(const ServiceConfig& config, std::unique_ptr<sparql::FixtureEndpoint>* fixture) {
  auto schemas = std::make_shared<schema::SchemaRegistry>();
  auto catalog = std::make_shared<catalog::Catalog>(schemas);
  ServiceComponents out;

  for (const auto& uc : config.use_cases) {
    if (!fs::exists(uc.schema_path)) throw ConfigError("schema file not found: " + uc.schema_path);
    if (!fs::exists(uc.catalog_path)) throw ConfigError("catalog file not found: " + uc.catalog_path);
    auto schema = schemas->load_file(uc.schema_path);
    if (schema->use_case_id != uc.id)
      throw ConfigError("schema " + uc.schema_path + " declares use case '" + schema->use_case_id + "', expected '" +
                        uc.id + "'");
    catalog->put({uc.id, schema->label, schema->fingerprint, uc.id}, catalog::load_catalog_file(uc.catalog_path));
    auto violations = catalog->validate_catalog(uc.id);
    if (!violations.empty()) {
      std::vector<std::string> lines;
      for (const auto& v : violations) lines.push_back(v.question_id + ": " + v.message);
      throw ConfigError("catalog " + uc.catalog_path + " is inconsistent with its schema: " + text::join(lines, "; "));
    }
    out.deps.endpoints[uc.id] = uc.endpoint;
  }

  if (config.fixture_endpoint) {
    if (!fixture) throw ConfigError("fixture endpoint requested without a holder");
    auto ep = std::make_unique<sparql::FixtureEndpoint>();
    for (const auto& uc : config.use_cases) {
      if (uc.graph_path.empty() || !fs::exists(uc.graph_path))
        throw ConfigError("graph file not found for use case '" + uc.id + "': " + uc.graph_path);
      ep->mount("/" + uc.id + "/sparql",
                std::make_shared<const sparql::TripleStore>(sparql::load_ntriples_file(uc.graph_path)));
    }
    ep->start();
    for (const auto& uc : config.use_cases) out.deps.endpoints[uc.id].url = ep->url("/" + uc.id + "/sparql");
    spdlog::info("fixture endpoint listening on port {}", ep->port());
    *fixture = std::move(ep);
  }
  for (const auto& [id, ep] : out.deps.endpoints) {
    try {
      ep.validate();
    } catch (const ValidationError& e) {
      throw ConfigError("endpoint for use case '" + id + "' is invalid: " + e.what());
    }
  }

  std::shared_ptr<session::SessionStore> store;
  if (config.data_dir.empty()) {
    store = std::make_shared<session::SessionStore>(std::make_shared<session::MemoryBackend>());
  } else {
    fs::create_directories(config.data_dir);
    store = std::make_shared<session::SessionStore>(
        std::make_shared<session::FileBackend>((fs::path(config.data_dir) / "sessions.jsonl").string()));
  }

  auto secrets = std::make_shared<const neural::SecretStore>(
      config.secrets_file.empty() ? neural::SecretStore{} : neural::SecretStore::from_file(config.secrets_file));
  auto settings = config.providers.empty() ? neural::builtin_remote_providers() : config.providers;
  auto registry = neural::build_registry(settings, secrets);
  if (!registry->has(config.default_provider))
    throw ConfigError("default provider '" + config.default_provider + "' is not configured");
  std::vector<std::string> refs;
  for (const auto& s : settings)
    if (!s.key_ref.empty()) refs.push_back(s.key_ref);

  out.deps.schemas = schemas;
  out.deps.catalog = catalog;
  out.deps.sessions = store;
  out.deps.neural = std::make_shared<neural::NeuralLayer>(registry);
  out.deps.cache_ttl = config.cache_ttl;
  out.rate_limit = config.rate_limit;
  out.default_llm.provider_id = config.default_provider;
  out.default_llm.model_id = config.default_model;
  out.trusted_proxy = config.trusted_proxy;
  out.drain_timeout = config.drain_timeout;
  out.secrets = secrets->known_values(refs);
  return out;
}

// ---- service ----

namespace {

void write_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void write_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                 const std::string& correlation_id, json extra = json::object()) {
  json body = {{"code", code}, {"message", message}, {"correlation_id", correlation_id}};
  body.update(extra);
  write_json(res, status, body);
}

int status_for(const std::string& code) {
  static const std::map<std::string, int> kStatus = {
      {"not_found", 404},
      {"precondition_failed", 400},
      {"validation_failed", 400},
      {"parse_error", 400},
      {"invalid_value", 400},
      {"sparql_syntax_error", 400},
      {"unsupported_query_form", 400},
      {"refinement_error", 422},
      {"integrity_error", 422},
      {"unsupported_bundle_version", 422},
      {"secret_leak", 500},
      {"provider_error", 502},
      {"provider_auth_error", 502},
      {"endpoint_unreachable", 502},
      {"endpoint_status", 502},
  };
  auto it = kStatus.find(code);
  return it == kStatus.end() ? 500 : it->second;
}

json parse_body(const httplib::Request& req) {
  if (text::trim(req.body).empty()) return json::object();
  auto doc = json::parse(req.body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw ValidationError("invalid request", {"request body must be a JSON object"});
  return doc;
}

std::string require_string(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string())
    throw ValidationError("invalid request", {std::string("'") + key + "' must be a string"});
  return it->get<std::string>();
}

// {name} placeholders -> regex capture groups
std::string to_pattern(const std::string& path) {
  static const std::regex placeholder(R"(\{[a-z_]+\})");
  return std::regex_replace(path, placeholder, "([^/]+)");
}

std::vector<std::string> placeholders(const std::string& path) {
  static const std::regex placeholder(R"(\{([a-z_]+)\})");
  std::vector<std::string> out;
  for (std::sregex_iterator it(path.begin(), path.end(), placeholder), end; it != end; ++it)
    out.push_back((*it)[1]);
  return out;
}

json outcome_response(const pipeline::QuestionOutcome& o) {
  json body = {{"session_id", o.session_id}, {"outcome", pipeline::to_json(o)}};
  body["chart_document"] = o.chart && o.dataset ? viz::chart_document(*o.chart, *o.dataset) : json(nullptr);
  return body;
}

}  // namespace

Service::Service(ServiceComponents components)
    : components_(std::move(components)),
      limiter_(components_.rate_limit, components_.default_llm.model_id),
      server_(std::make_unique<httplib::Server>()) {
  pipeline_ = std::make_unique<pipeline::Pipeline>(components_.deps);
  register_routes();
  server_->set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    if (res.status == 404) {
      write_error(res, 404, "route_not_found", "no route for " + req.method + " " + req.path, random_id());
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });
}

Service::~Service() {
  if (thread_.joinable()) stop();
}

void Service::add_route(std::string method, std::string path, std::string summary, Handler handler) {
  Route r{{std::move(method), std::move(path), std::move(summary)}, {}, std::move(handler)};
  r.pattern = to_pattern(r.info.path);
  routes_.push_back(r.info);
  auto h = r.handler;
  auto wrapped = [this, h, info = r.info](const httplib::Request& req, httplib::Response& res) {
    const auto correlation_id = random_id();
    res.set_header("X-Correlation-Id", correlation_id);
    {
      std::lock_guard lock(flight_mutex_);
      if (draining_) {
        write_error(res, 503, "shutting_down", "service is shutting down", correlation_id);
        return;
      }
      ++in_flight_;
    }
    try {
      h(req, res, correlation_id);
    } catch (const ValidationError& e) {
      write_error(res, 400, e.code(), e.what(), correlation_id, {{"diagnostics", e.violations()}});
    } catch (const pipeline::RefinementError& e) {
      write_error(res, 422, e.code(), e.what(), correlation_id, {{"diagnostics", e.diagnostics()}});
    } catch (const Error& e) {
      write_error(res, status_for(e.code()), e.code(), e.what(), correlation_id);
    } catch (const json::exception& e) {
      write_error(res, 400, "invalid_request", e.what(), correlation_id);
    } catch (const std::exception& e) {
      spdlog::error("[{}] unhandled error: {}", correlation_id, e.what());
      write_error(res, 500, "internal_error", "internal error", correlation_id);
    }
    if (res.status >= 500) spdlog::warn("[{}] {} {} -> {}", correlation_id, req.method, req.path, res.status);
    else spdlog::debug("[{}] {} {} -> {}", correlation_id, req.method, req.path, res.status);
    {
      std::lock_guard lock(flight_mutex_);
      --in_flight_;
    }
    flight_cv_.notify_all();
  };
  if (r.info.method == "GET") server_->Get(r.pattern, wrapped);
  else server_->Post(r.pattern, wrapped);
  route_table_.push_back(std::move(r));
}

std::string Service::client_key(const httplib::Request& req) const {
  if (components_.trusted_proxy && req.has_header("X-Forwarded-For")) {
    auto first = text::trim(text::split(req.get_header_value("X-Forwarded-For"), ',').front());
    if (!first.empty()) return first;
  }
  return req.remote_addr;
}

neural::LlmConfig Service::llm_config_from(const json& body) const {
  auto cfg = components_.default_llm;
  if (auto it = body.find("llm"); it != body.end() && it->is_object()) {
    cfg.provider_id = it->value("provider_id", cfg.provider_id);
    cfg.model_id = it->value("model_id", cfg.model_id);
    cfg.temperature = it->value("temperature", cfg.temperature);
    cfg.max_output_tokens = it->value("max_output_tokens", cfg.max_output_tokens);
  }
  cfg.validate();
  if (!components_.deps.neural || !components_.deps.neural->providers().has(cfg.provider_id))
    throw ValidationError("invalid LLM configuration", {"provider '" + cfg.provider_id + "' is not configured"});
  return cfg;
}

std::string Service::session_for(const json& body, const httplib::Request& req) {
  if (auto it = body.find("session_id"); it != body.end() && it->is_string()) {
    sessions().info(it->get<std::string>());
    return it->get<std::string>();
  }
  return sessions().create_session(client_key(req));
}

bool Service::admit(const httplib::Request& req, httplib::Response& res, const neural::LlmConfig& cfg) {
  auto d = limiter_.check_and_consume(client_key(req), cfg.model_id, components_.clock());
  if (d.allowed) {
    if (d.limited) res.set_header("X-RateLimit-Remaining", std::to_string(d.remaining));
    return true;
  }
  res.set_header("Retry-After", std::to_string(d.retry_after.count()));
  write_error(res, 429, "rate_limited",
              "daily limit of " + std::to_string(limiter_.limit()) + " requests for model '" + cfg.model_id +
                  "' reached",
              res.get_header_value("X-Correlation-Id"),
              {{"retry_after_seconds", d.retry_after.count()}, {"limit", limiter_.limit()}});
  return false;
}

void Service::register_routes() {
  auto& deps = components_.deps;

  add_route("GET", "/use-cases", "List registered use cases", [&](const httplib::Request&, httplib::Response& res, const std::string&) {
    json out = json::array();
    for (const auto& d : deps.catalog->list_use_cases()) {
      auto schema = deps.schemas->get(d.use_case_id);
      out.push_back({{"use_case_id", d.use_case_id},
                     {"label", d.label.empty() ? schema->label : d.label},
                     {"schema_fingerprint", schema->fingerprint},
                     {"question_count", deps.catalog->list_questions(d.use_case_id).size()}});
    }
    write_json(res, 200, out);
  });

  add_route("GET", "/use-cases/{id}/schema", "Graph schema of a use case", [&](const httplib::Request& req, httplib::Response& res, const std::string&) {
    auto schema = deps.schemas->get(req.matches[1]);
    write_json(res, 200,
               {{"use_case_id", schema->use_case_id},
                {"fingerprint", schema->fingerprint},
                {"schema", schema::to_json(*schema)}});
  });

  add_route("GET", "/use-cases/{id}/questions", "Curated questions of a use case",
            [&](const httplib::Request& req, httplib::Response& res, const std::string&) {
              json out = json::array();
              for (const auto& q : deps.catalog->list_questions(req.matches[1])) out.push_back(catalog::to_json(q));
              write_json(res, 200, out);
            });

  add_route("POST", "/use-cases/{id}/questions/{index}/run", "Run a curated question",
            [&](const httplib::Request& req, httplib::Response& res, const std::string&) {
              const std::string uc = req.matches[1];
              const std::string index_text = req.matches[2];
              int index = 0;
              try {
                std::size_t used = 0;
                index = std::stoi(index_text, &used);
                if (used != index_text.size()) throw std::invalid_argument(index_text);
              } catch (const std::exception&) {
                throw ValidationError("invalid request", {"question index must be an integer"});
              }
              auto body = parse_body(req);
              deps.catalog->get_question(uc, index);
              auto sid = session_for(body, req);
              write_json(res, 200, outcome_response(pipeline_->run_curated(uc, index, sid)));
            });

  add_route("POST", "/use-cases/{id}/custom/run", "Generate, run and explain a custom question",
            [&](const httplib::Request& req, httplib::Response& res, const std::string&) {
              const std::string uc = req.matches[1];
              auto body = parse_body(req);
              const auto question = require_string(body, "question");
              if (text::trim(question).empty()) throw PreconditionError("question text is empty");
              deps.schemas->get(uc);
              auto cfg = llm_config_from(body);
              if (auto it = body.find("session_id"); it != body.end() && it->is_string())
                sessions().info(it->get<std::string>());
              if (!admit(req, res, cfg)) return;
              auto sid = session_for(body, req);
              write_json(res, 200, outcome_response(pipeline_->run_custom(question, uc, sid, cfg)));
            });

  add_route("POST", "/sessions", "Open a session", [&](const httplib::Request& req, httplib::Response& res, const std::string&) {
    auto sid = sessions().create_session(client_key(req));
    write_json(res, 201, {{"session_id", sid}});
  });

  add_route("POST", "/sessions/{id}/refine", "Refine an outcome manually or by prompt",
            [&](const httplib::Request& req, httplib::Response& res, const std::string&) {
              const std::string sid = req.matches[1];
              auto body = parse_body(req);
              const auto outcome_id = require_string(body, "outcome_id");
              const auto instruction = require_string(body, "instruction");
              const auto target = pipeline::refine_target_from_string(require_string(body, "target"));
              const auto mode = pipeline::refine_mode_from_string(require_string(body, "mode"));
              auto base = sessions().find_outcome(sid, outcome_id);
              if (!base) throw NotFoundError("outcome '" + outcome_id + "' not found in session '" + sid + "'");
              std::optional<neural::LlmConfig> cfg;
              if (mode == pipeline::RefineMode::prompt) {
                if (body.contains("llm") || !base->llm_config) {
                  cfg = llm_config_from(body);
                } else {
                  cfg = neural::config_from_json(*base->llm_config);
                  cfg->validate();
                }
                if (!admit(req, res, *cfg)) return;
              }
              write_json(res, 200, outcome_response(pipeline_->refine(sid, outcome_id, instruction, target, mode, cfg)));
            });

  add_route("GET", "/sessions/{id}/history", "Full event history and current context of a session",
            [&](const httplib::Request& req, httplib::Response& res, const std::string&) {
              const std::string sid = req.matches[1];
              auto info = sessions().info(sid);
              json events = json::array();
              for (const auto& e : sessions().events(sid)) events.push_back(session::to_json(e));
              json context = json::array();
              for (const auto& m : sessions().current(sid).context)
                context.push_back({{"role", neural::to_string(m.role)}, {"content", m.content}});
              write_json(res, 200,
                         {{"session_id", sid},
                          {"owner", info.owner},
                          {"created_at", format_timestamp(info.created_at)},
                          {"events", events},
                          {"context", context}});
            });

  add_route("GET", "/sessions/{id}/restore/{event_id}", "Session state as of an earlier event",
            [&](const httplib::Request& req, httplib::Response& res, const std::string&) {
              auto st = sessions().restore(req.matches[1], req.matches[2]);
              json events = json::array();
              for (const auto& e : st.events) events.push_back(session::to_json(e));
              json outcomes = json::array();
              for (const auto& o : st.outcomes) outcomes.push_back(pipeline::to_json(o));
              json context = json::array();
              for (const auto& m : st.context)
                context.push_back({{"role", neural::to_string(m.role)}, {"content", m.content}});
              write_json(res, 200,
                         {{"session_id", st.session_id},
                          {"up_to_event_id", st.up_to_event_id},
                          {"events", events},
                          {"outcomes", outcomes},
                          {"context", context}});
            });

  add_route("POST", "/sessions/{id}/events/{event_id}/retained", "Retain or discard an event from the LLM context",
            [&](const httplib::Request& req, httplib::Response& res, const std::string&) {
              auto body = parse_body(req);
              auto it = body.find("retained");
              if (it == body.end() || !it->is_boolean())
                throw ValidationError("invalid request", {"'retained' must be a boolean"});
              sessions().set_retained(req.matches[1], req.matches[2], it->get<bool>());
              write_json(res, 200, {{"event_id", req.matches[2].str()}, {"retained", it->get<bool>()}});
            });

  add_route("GET", "/sessions/{id}/export/{outcome_id}", "Download an outcome bundle",
            [&](const httplib::Request& req, httplib::Response& res, const std::string&) {
              const std::string oid = req.matches[2];
              auto bundle = session::export_bundle(sessions(), req.matches[1], oid, components_.secrets);
              res.set_header("Content-Disposition",
                             "attachment; filename=\"" + oid + std::string(session::kBundleExtension) + "\"");
              write_json(res, 200, bundle);
            });

  add_route("POST", "/import", "Import a bundle into a new session", [&](const httplib::Request& req, httplib::Response& res, const std::string&) {
    auto r = session::import_bundle(sessions(), *deps.schemas, req.body, client_key(req));
    write_json(res, 201, {{"session_id", r.session_id}, {"outcome_id", r.outcome_id}, {"warnings", r.warnings}});
  });

  add_route("GET", "/statistics", "Catalog and usage statistics", [&](const httplib::Request&, httplib::Response& res, const std::string&) {
    write_json(res, 200, to_json(compute_statistics(*deps.catalog, sessions())));
  });

  add_route("GET", "/api-description", "Machine-readable description of every route",
            [&](const httplib::Request&, httplib::Response& res, const std::string&) { write_json(res, 200, api_description()); });

  add_route("GET", "/health", "Liveness probe", [&](const httplib::Request&, httplib::Response& res, const std::string&) {
    write_json(res, 200, {{"status", "ok"}});
  });
}

json Service::api_description() const {
  json paths = json::object();
  for (const auto& r : routes_) {
    json params = json::array();
    for (const auto& name : placeholders(r.path))
      params.push_back({{"name", name}, {"in", "path"}, {"required", true}, {"schema", {{"type", "string"}}}});
    json op = {{"summary", r.summary},
               {"parameters", params},
               {"responses",
                {{"200", {{"description", "success"}}},
                 {"default", {{"description", "error body with code, message and correlation_id"}}}}}};
    if (r.method == "POST") op["requestBody"] = {{"content", {{"application/json", {{"schema", {{"type", "object"}}}}}}}};
    paths[r.path][text::to_lower(r.method)] = op;
  }
  return {{"openapi", "3.0.3"},
          {"info", {{"title", "Competency question service"}, {"version", "1.0.0"}}},
          {"x-rate-limit", {{"limit_per_day", limiter_.limit()}, {"model", limiter_.default_model()}}},
          {"paths", paths}};
}

int Service::start(const std::string& host, int port) {
  if (thread_.joinable()) throw PreconditionError("service already started");
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    if (port_ < 0) throw ConfigError("cannot bind " + host);
  } else {
    if (!server_->bind_to_port(host, port)) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  spdlog::info("service listening on {}:{}", host, port_);
  return port_;
}

void Service::stop() {
  {
    std::unique_lock lock(flight_mutex_);
    draining_ = true;
    if (!flight_cv_.wait_for(lock, components_.drain_timeout, [&] { return in_flight_ == 0; }))
      spdlog::warn("drain timeout reached with {} request(s) in flight", in_flight_);
  }
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace compass::api
