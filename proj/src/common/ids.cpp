#include "compass/common/ids.hpp"

#include <cstdint>
#include <cstdio>
#include <mutex>
#include <random>

namespace compass {

std::string random_id() {
  static std::mutex mutex;
  static std::mt19937_64 engine{std::random_device{}()};
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  {
    std::lock_guard lock(mutex);
    hi = engine();
    lo = engine();
  }
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf;
}

}  // namespace compass
