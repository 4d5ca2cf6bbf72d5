#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "compass/sparql/query.hpp"
#include "compass/sparql/results.hpp"

namespace httplib {
class Server;
}

namespace compass::sparql {

struct Triple {
  RdfTerm subject;
  RdfTerm predicate;
  RdfTerm object;

  bool operator==(const Triple&) const = default;
};

// Small in-memory graph backing the fixture endpoint. Not meant for
// production data volumes.
class TripleStore {
 public:
  void add(Triple t);
  std::size_t size() const { return triples_.size(); }
  const std::vector<Triple>& triples() const { return triples_; }

  // Indices of triples matching the given constraints (nullopt = any).
  std::vector<std::size_t> match(const std::optional<RdfTerm>& s,
                                 const std::optional<RdfTerm>& p,
                                 const std::optional<RdfTerm>& o) const;

 private:
  std::vector<Triple> triples_;
  std::map<RdfTerm, std::vector<std::size_t>> by_predicate_;
};

// Parses an N-Triples document; errors are ParseError with line/column.
TripleStore load_ntriples(std::string_view document);
TripleStore load_ntriples_file(const std::string& path);

class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& message) : Error("evaluation_error", message) {}
};

// Evaluates an analyzable query against the store.
ResultSet evaluate(const ParsedQuery& query, const TripleStore& store);

// SPARQL 1.1 protocol server over named in-memory graphs, one per path.
class FixtureEndpoint {
 public:
  FixtureEndpoint();
  ~FixtureEndpoint();
  FixtureEndpoint(const FixtureEndpoint&) = delete;
  FixtureEndpoint& operator=(const FixtureEndpoint&) = delete;

  // `path` such as "/kg-empire/sparql". Must be called before start().
  void mount(const std::string& path, std::shared_ptr<const TripleStore> store);

  // Binds to host:port (0 picks a free port) and serves on a background
  // thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  // Blocks the caller until stop() is called from elsewhere.
  void wait();

  int port() const { return port_; }
  std::string url(const std::string& path) const;

 private:
  std::unique_ptr<httplib::Server> server_;
  std::map<std::string, std::shared_ptr<const TripleStore>> graphs_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
};

}  // namespace compass::sparql
