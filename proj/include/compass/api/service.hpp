#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "compass/api/rate_limiter.hpp"
#include "compass/neural/providers.hpp"
#include "compass/pipeline/pipeline.hpp"
#include "compass/sparql/triple_store.hpp"

namespace httplib {
class Server;
struct Request;
struct Response;
}  // namespace httplib

namespace compass::api {

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

struct UseCaseConfig {
  std::string id;
  std::string schema_path;
  std::string catalog_path;
  std::string graph_path;  // N-Triples served by the fixture endpoint
  sparql::EndpointConfig endpoint;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;  // empty keeps sessions in memory
  std::vector<UseCaseConfig> use_cases;
  int rate_limit = kDefaultDailyLimit;
  std::string default_provider{neural::kDefaultProvider};
  std::string default_model{neural::kDefaultModel};
  std::vector<neural::ProviderSettings> providers;  // empty registers the built-in adapters
  std::string secrets_file;
  std::chrono::milliseconds cache_ttl{0};
  std::chrono::milliseconds drain_timeout{10000};
  bool trusted_proxy = false;
  bool fixture_endpoint = false;
};

// Relative paths are resolved against the directory of the config file.
// COMPASS_DEFAULT_MODEL overrides the default model.
ServiceConfig load_service_config(const std::string& path);
ServiceConfig service_config_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");

struct ServiceComponents {
  pipeline::PipelineDeps deps;
  int rate_limit = kDefaultDailyLimit;
  neural::LlmConfig default_llm;
  bool trusted_proxy = false;
  std::chrono::milliseconds drain_timeout{10000};
  std::vector<std::string> secrets;  // values scanned for before export
  std::function<Timestamp()> clock = now_utc;
};

struct RouteInfo {
  std::string method;   // GET or POST
  std::string path;     // with {placeholders}
  std::string summary;
};

class Service {
 public:
  explicit Service(ServiceComponents components);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on a background thread; returns the bound port. Throws
  // ConfigError when the address cannot be bound.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Refuses new requests, waits up to the drain timeout for in-flight ones,
  // then stops the listener.
  void stop();
  int port() const { return port_; }

  const std::vector<RouteInfo>& routes() const { return routes_; }
  nlohmann::json api_description() const;

  pipeline::Pipeline& pipeline() { return *pipeline_; }
  RateLimiter& limiter() { return limiter_; }
  session::SessionStore& sessions() { return *components_.deps.sessions; }

 private:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&, const std::string&)>;
  struct Route {
    RouteInfo info;
    std::string pattern;
    Handler handler;
  };

  void register_routes();
  void add_route(std::string method, std::string path, std::string summary, Handler handler);
  std::string client_key(const httplib::Request& req) const;
  neural::LlmConfig llm_config_from(const nlohmann::json& body) const;
  std::string session_for(const nlohmann::json& body, const httplib::Request& req);
  // Applies the default-model limit; false (with the 429 written) when denied.
  bool admit(const httplib::Request& req, httplib::Response& res, const neural::LlmConfig& cfg);

  ServiceComponents components_;
  std::unique_ptr<pipeline::Pipeline> pipeline_;
  RateLimiter limiter_;
  std::unique_ptr<httplib::Server> server_;
  std::vector<Route> route_table_;
  std::vector<RouteInfo> routes_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<bool> draining_{false};
  std::mutex flight_mutex_;
  std::condition_variable flight_cv_;
  int in_flight_ = 0;
};

// Loads schemas, catalogs, providers and the session log described by the
// config. With config.fixture_endpoint set, `fixture` receives a started
// endpoint serving each use case graph and endpoints point at it.
ServiceComponents build_components(const ServiceConfig& config,
                                   std::unique_ptr<sparql::FixtureEndpoint>* fixture = nullptr);

}  // namespace compass::api
