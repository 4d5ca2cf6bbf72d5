#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <pthread.h>

#include <spdlog/spdlog.h>

#include "compass/api/service.hpp"
#include "compass/api/statistics.hpp"

using namespace compass;

namespace {

struct ServeOptions {
  std::string config = COMPASS_DEFAULT_CONFIG;
  std::optional<int> port;
  std::optional<std::string> data_dir;
  std::optional<std::string> host;
  bool fixture_endpoint = false;
  bool trusted_proxy = false;
};

api::ServiceConfig load(const ServeOptions& o) {
  auto cfg = api::load_service_config(o.config);
  if (o.port) cfg.port = *o.port;
  if (o.host) cfg.host = *o.host;
  if (o.data_dir) cfg.data_dir = *o.data_dir;
  if (o.fixture_endpoint) cfg.fixture_endpoint = true;
  if (o.trusted_proxy) cfg.trusted_proxy = true;
  return cfg;
}

int serve(const ServeOptions& o) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto cfg = load(o);
  std::unique_ptr<sparql::FixtureEndpoint> fixture;
  api::Service service(api::build_components(cfg, &fixture));
  service.start(cfg.host, cfg.port);

  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("signal {}, draining", sig);
  service.stop();
  if (fixture) fixture->stop();
  return 0;
}

int validate(const ServeOptions& o) {
  auto cfg = load(o);
  cfg.data_dir.clear();
  std::unique_ptr<sparql::FixtureEndpoint> fixture;
  auto components = api::build_components(cfg, &fixture);
  auto report = api::compute_statistics(*components.deps.catalog, *components.deps.sessions);
  for (const auto& s : report.use_cases)
    std::cout << s.use_case_id << ": " << s.curated_questions << " curated questions\n";
  if (fixture) fixture->stop();
  return 0;
}

int run_curated(const ServeOptions& o, const std::string& use_case, std::size_t index) {
  auto cfg = load(o);
  cfg.data_dir.clear();
  std::unique_ptr<sparql::FixtureEndpoint> fixture;
  auto components = api::build_components(cfg, &fixture);
  pipeline::Pipeline p(components.deps);
  auto sid = components.deps.sessions->create_session("cli");
  auto outcome = p.run_curated(use_case, index, sid);
  std::cout << pipeline::to_json(outcome).dump(2) << "\n";
  if (fixture) fixture->stop();
  return outcome.status == pipeline::OutcomeStatus::complete ? 0 : 3;
}

void common_flags(CLI::App* cmd, ServeOptions& o) {
  cmd->add_option("--config", o.config, "service config file")->capture_default_str();
  cmd->add_option("--data-dir", o.data_dir, "directory for the session log (empty keeps it in memory)");
  cmd->add_flag("--fixture-endpoint", o.fixture_endpoint, "serve the bundled graphs from an in-process endpoint");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compass: competency question service"};
  app.require_subcommand(1);
  ServeOptions opts;

  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  common_flags(serve_cmd, opts);
  serve_cmd->add_option("--port", opts.port, "listen port");
  serve_cmd->add_option("--host", opts.host, "listen address");
  serve_cmd->add_flag("--trusted-proxy", opts.trusted_proxy, "key the rate limit on X-Forwarded-For");

  auto* validate_cmd = app.add_subcommand("validate", "load schemas and catalogs and check them");
  common_flags(validate_cmd, opts);

  std::string use_case;
  std::size_t index = 0;
  auto* run_cmd = app.add_subcommand("run", "run one curated question and print the outcome");
  common_flags(run_cmd, opts);
  run_cmd->add_option("use_case", use_case)->required();
  run_cmd->add_option("index", index)->required()->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(opts);
    if (*validate_cmd) return validate(opts);
    return run_curated(opts, use_case, index);
  } catch (const api::ConfigError& e) {
    spdlog::error("startup failed: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
