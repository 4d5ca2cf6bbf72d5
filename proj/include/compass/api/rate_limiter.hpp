#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <string>

#include "compass/common/time.hpp"

namespace compass::api {

inline constexpr int kDefaultDailyLimit = 25;

struct RateDecision {
  bool allowed = true;
  bool limited = false;  // false when the model is not subject to the limit
  int remaining = 0;
  std::chrono::seconds retry_after{0};  // set when denied
};

// Seconds from `now` to the next 00:00 UTC, at least one.
std::chrono::seconds until_next_utc_midnight(Timestamp now);

// Per-key daily counter for requests that use the default model. The window
// is the UTC calendar date.
class RateLimiter {
 public:
  RateLimiter(int limit, std::string default_model);

  RateDecision check_and_consume(const std::string& key, const std::string& model_id, Timestamp now);
  // Remaining allowance without consuming.
  int remaining(const std::string& key, Timestamp now) const;

  int limit() const { return limit_; }
  const std::string& default_model() const { return default_model_; }

 private:
  struct Window {
    std::int64_t day = 0;
    int count = 0;
  };

  int limit_;
  std::string default_model_;
  mutable std::mutex mutex_;
  std::map<std::string, Window> windows_;
};

}  // namespace compass::api
