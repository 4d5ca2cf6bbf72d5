#include "compass/api/rate_limiter.hpp"

#include "compass/common/error.hpp"

namespace compass::api {

namespace {

std::int64_t utc_day(Timestamp t) {
  return std::chrono::floor<std::chrono::days>(t).time_since_epoch().count();
}

}  // namespace

std::chrono::seconds until_next_utc_midnight(Timestamp now) {
  const auto next = std::chrono::floor<std::chrono::days>(now) + std::chrono::days(1);
  auto left = std::chrono::ceil<std::chrono::seconds>(next - now);
  return std::max(left, std::chrono::seconds(1));
}

RateLimiter::RateLimiter(int limit, std::string default_model)
    : limit_(limit), default_model_(std::move(default_model)) {
  if (limit_ < 0) throw ValidationError("invalid rate limit", {"limit must be >= 0"});
}

RateDecision RateLimiter::check_and_consume(const std::string& key, const std::string& model_id, Timestamp now) {
  if (model_id != default_model_) return {true, false, limit_, std::chrono::seconds(0)};
  const auto day = utc_day(now);
  std::lock_guard lock(mutex_);
  auto& w = windows_[key];
  if (w.day != day) w = {day, 0};
  if (w.count >= limit_) return {false, true, 0, until_next_utc_midnight(now)};
  ++w.count;
  return {true, true, limit_ - w.count, std::chrono::seconds(0)};
}

int RateLimiter::remaining(const std::string& key, Timestamp now) const {
  std::lock_guard lock(mutex_);
  auto it = windows_.find(key);
  if (it == windows_.end() || it->second.day != utc_day(now)) return limit_;
  return limit_ - it->second.count;
}

}  // namespace compass::api
