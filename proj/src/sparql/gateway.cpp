#include "compass/sparql/gateway.hpp"

#include <regex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "compass/common/text.hpp"

namespace compass::sparql {

namespace {

constexpr std::size_t kSnippetBytes = 240;

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

std::optional<ParsedUrl> split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/?#]+)(/[^#]*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re)) return std::nullopt;
  return ParsedUrl{m[1].str(), m[2].matched ? m[2].str() : "/"};
}

struct Attempt {
  enum class Outcome { ok, transport, status, timeout } outcome = Outcome::transport;
  int status = 0;
  std::string body;
  std::string detail;
};

// One HTTP exchange with a hard wall-clock limit. The worker owns the client
// through a shared_ptr so a stuck request can be abandoned after stop().
Attempt attempt_once(const ParsedUrl& url, const ParsedQuery& query, const EndpointConfig& ep,
                     std::chrono::steady_clock::time_point deadline) {
  auto client = std::make_shared<httplib::Client>(url.origin);
  client->set_connection_timeout(ep.timeout);
  client->set_read_timeout(ep.timeout);
  client->set_write_timeout(ep.timeout);
  client->set_keep_alive(false);

  auto promise = std::make_shared<std::promise<Attempt>>();
  auto future = promise->get_future();
  const std::string text = query.text;
  const httplib::Headers headers = {{"Accept", std::string(kResultsMediaType)},
                                    {"User-Agent", ep.user_agent}};
  const std::string path = url.path;
  const HttpMethod method = ep.method;

  std::thread worker([client, promise, text, headers, path, method] {
    Attempt a;
    httplib::Params params{{"query", text}};
    auto res = method == HttpMethod::post ? client->Post(path, headers, params)
                                          : client->Get(path, params, headers);
    if (!res) {
      a.outcome = Attempt::Outcome::transport;
      a.detail = httplib::to_string(res.error());
    } else {
      a.status = res->status;
      a.body = std::move(res->body);
      a.outcome = (res->status >= 200 && res->status < 300) ? Attempt::Outcome::ok
                                                            : Attempt::Outcome::status;
    }
    promise->set_value(std::move(a));
  });
  worker.detach();

  const auto limit = std::min(std::chrono::steady_clock::now() + ep.timeout, deadline);
  if (future.wait_until(limit) == std::future_status::ready) return future.get();
  client->stop();
  Attempt a;
  a.outcome = Attempt::Outcome::timeout;
  a.detail = "no complete response within " + std::to_string(ep.timeout.count()) + " ms";
  return a;
}

std::chrono::milliseconds backoff_for(const EndpointConfig& ep, int retry_index) {
  auto delay = ep.initial_backoff;
  for (int i = 0; i < retry_index && delay < ep.max_backoff; ++i) delay *= 2;
  return std::min(delay, ep.max_backoff);
}

}  // namespace

void EndpointConfig::validate() const {
  std::vector<std::string> violations;
  if (!split_url(url)) violations.push_back("url must be an http(s) URL: '" + url + "'");
  if (timeout.count() <= 0) violations.push_back("timeout must be positive");
  if (max_retries < 0) violations.push_back("max_retries must not be negative");
  if (initial_backoff.count() < 0 || max_backoff.count() < 0) {
    violations.push_back("backoff durations must not be negative");
  }
  if (!violations.empty()) throw ValidationError("invalid endpoint configuration", violations);
}

std::chrono::milliseconds wall_time_bound(const EndpointConfig& ep) {
  auto total = ep.timeout * (ep.max_retries + 1);
  for (int i = 0; i < ep.max_retries; ++i) total += backoff_for(ep, i);
  return total;
}

ResultSet execute(const ParsedQuery& query, const EndpointConfig& ep) {
  ep.validate();
  const auto url = *split_url(ep.url);
  const int attempts_allowed = ep.max_retries + 1;
  // Each attempt is additionally clipped so the whole call honors wall_time_bound.
  const auto deadline = std::chrono::steady_clock::now() + wall_time_bound(ep);
  Attempt last;
  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    last = attempt_once(url, query, ep, deadline);
    switch (last.outcome) {
      case Attempt::Outcome::ok: return decode_results(last.body);
      case Attempt::Outcome::status:
        if (last.status < 500) {
          throw EndpointStatusError(ep.url, last.status,
                                    std::string(text::utf8_prefix(last.body, kSnippetBytes)),
                                    attempt);
        }
        break;
      case Attempt::Outcome::transport:
      case Attempt::Outcome::timeout: break;
    }
    if (attempt < attempts_allowed) {
      const auto delay = backoff_for(ep, attempt - 1);
      spdlog::warn("sparql endpoint {} attempt {}/{} failed ({}), retrying in {} ms", ep.url,
                   attempt, attempts_allowed,
                   last.outcome == Attempt::Outcome::status ? "HTTP " + std::to_string(last.status)
                                                            : last.detail,
                   delay.count());
      std::this_thread::sleep_until(std::min(std::chrono::steady_clock::now() + delay, deadline));
    }
  }
  if (last.outcome == Attempt::Outcome::status) {
    throw EndpointStatusError(ep.url, last.status,
                              std::string(text::utf8_prefix(last.body, kSnippetBytes)),
                              attempts_allowed);
  }
  throw EndpointUnreachableError(ep.url, attempts_allowed, last.detail);
}

ResultSet ResultCache::get_or_compute(const std::string& query_text, const std::string& endpoint,
                                      const std::string& fingerprint,
                                      const std::function<ResultSet()>& produce) {
  if (!enabled()) return produce();
  const Key key{query_text, endpoint, fingerprint};
  std::shared_future<ResultSet> shared;
  std::promise<ResultSet> promise;
  bool producer = false;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    auto it = entries_.find(key);
    if (it != entries_.end() && now - it->second.stored_at > ttl_) {
      entries_.erase(it);
      it = entries_.end();
    }
    if (it == entries_.end()) {
      shared = promise.get_future().share();
      entries_[key] = Entry{shared, now};
      producer = true;
    } else {
      shared = it->second.value;
    }
  }
  if (producer) {
    try {
      promise.set_value(produce());
    } catch (...) {
      promise.set_exception(std::current_exception());
      std::lock_guard lock(mutex_);
      entries_.erase(key);
    }
  }
  return shared.get();
}

std::size_t ResultCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

ResultSet Gateway::run(const ParsedQuery& query, const EndpointConfig& ep,
                       const std::string& schema_fingerprint) {
  return cache_.get_or_compute(query.text, ep.url, schema_fingerprint,
                               [&] { return execute(query, ep); });
}

}  // namespace compass::sparql
