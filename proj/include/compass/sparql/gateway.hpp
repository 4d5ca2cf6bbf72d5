#pragma once

#include <chrono>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>

#include "compass/common/error.hpp"
#include "compass/sparql/query.hpp"
#include "compass/sparql/results.hpp"

namespace compass::sparql {

enum class HttpMethod { get, post };

struct EndpointConfig {
  std::string url;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  std::string user_agent = "compass-sparql-gateway/1.0";
  HttpMethod method = HttpMethod::post;
  std::chrono::milliseconds initial_backoff{250};
  std::chrono::milliseconds max_backoff{2000};

  // Throws ValidationError when timeout <= 0, max_retries < 0 or url is not http(s).
  void validate() const;
};

class EndpointUnreachableError : public Error {
 public:
  EndpointUnreachableError(const std::string& url, int attempts, const std::string& detail)
      : Error("endpoint_unreachable", "endpoint " + url + " unreachable after " +
                                          std::to_string(attempts) + " attempt(s): " + detail),
        attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class EndpointStatusError : public Error {
 public:
  EndpointStatusError(const std::string& url, int status, std::string body_snippet, int attempts)
      : Error("endpoint_status", "endpoint " + url + " answered HTTP " + std::to_string(status) +
                                     ": " + body_snippet),
        status_(status),
        body_snippet_(std::move(body_snippet)),
        attempts_(attempts) {}
  int status() const noexcept { return status_; }
  const std::string& body_snippet() const noexcept { return body_snippet_; }
  int attempts() const noexcept { return attempts_; }
  bool is_client_error() const noexcept { return status_ >= 400 && status_ < 500; }

 private:
  int status_;
  std::string body_snippet_;
  int attempts_;
};

// Upper bound on the wall time of one execute() call.
std::chrono::milliseconds wall_time_bound(const EndpointConfig& ep);

// Sends the query over the SPARQL 1.1 protocol and decodes the JSON results.
// Transport failures, timeouts and 5xx answers are retried with capped
// exponential backoff; 4xx answers are returned immediately.
ResultSet execute(const ParsedQuery& query, const EndpointConfig& ep);

// Optional result cache keyed by (query text, endpoint URL, schema fingerprint).
// A TTL of zero disables caching entirely.
class ResultCache {
 public:
  explicit ResultCache(std::chrono::milliseconds ttl) : ttl_(ttl) {}

  bool enabled() const { return ttl_.count() > 0; }

  // Atomic get-or-insert: concurrent callers with the same key share one
  // producer invocation. Failures are not cached.
  ResultSet get_or_compute(const std::string& query_text, const std::string& endpoint,
                           const std::string& fingerprint,
                           const std::function<ResultSet()>& produce);

  std::size_t size() const;

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  struct Entry {
    std::shared_future<ResultSet> value;
    std::chrono::steady_clock::time_point stored_at;
  };

  std::chrono::milliseconds ttl_;
  mutable std::mutex mutex_;
  std::map<Key, Entry> entries_;
};

// execute() wrapped with an optional cache.
class Gateway {
 public:
  explicit Gateway(std::chrono::milliseconds cache_ttl = std::chrono::milliseconds{0})
      : cache_(cache_ttl) {}

  ResultSet run(const ParsedQuery& query, const EndpointConfig& ep,
                const std::string& schema_fingerprint);

  const ResultCache& cache() const { return cache_; }

 private:
  ResultCache cache_;
};

}  // namespace compass::sparql
