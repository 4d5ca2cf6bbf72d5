#include <httplib.h>
#include <spdlog/spdlog.h>

#include "compass/sparql/triple_store.hpp"

namespace compass::sparql {

namespace {

void answer_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(message + "\n", "text/plain; charset=utf-8");
}

}  // namespace

FixtureEndpoint::FixtureEndpoint() : server_(std::make_unique<httplib::Server>()) {}

FixtureEndpoint::~FixtureEndpoint() { stop(); }

void FixtureEndpoint::mount(const std::string& path, std::shared_ptr<const TripleStore> store) {
  graphs_[path] = std::move(store);
}

int FixtureEndpoint::start(const std::string& host, int port) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    auto it = graphs_.find(req.path);
    if (it == graphs_.end()) return answer_error(res, 404, "no graph mounted at " + req.path);
    std::string text;
    if (req.has_param("query")) {
      text = req.get_param_value("query");
    } else if (req.method == "POST" &&
               req.get_header_value("Content-Type").rfind("application/sparql-query", 0) == 0) {
      text = req.body;
    } else {
      return answer_error(res, 400, "missing 'query' parameter");
    }
    try {
      const ParsedQuery q = parse_query(text);
      const ResultSet rs = evaluate(q, *it->second);
      res.set_content(encode_results(rs), std::string(kResultsMediaType));
    } catch (const Error& e) {
      answer_error(res, 400, std::string(e.code()) + ": " + e.what());
    }
  };
  server_->Get(R"(/.*)", handler);
  server_->Post(R"(/.*)", handler);

  host_ = host;
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw Error("startup_failed", "fixture endpoint cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  spdlog::info("fixture SPARQL endpoint listening on {}:{}", host_, port_);
  return port_;
}

void FixtureEndpoint::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void FixtureEndpoint::wait() {
  if (thread_.joinable()) thread_.join();
}

std::string FixtureEndpoint::url(const std::string& path) const {
  return "http://" + host_ + ":" + std::to_string(port_) + path;
}

}  // namespace compass::sparql
