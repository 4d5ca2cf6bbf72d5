#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace compass {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

Timestamp now_utc();

// "2026-03-23T10:15:00.123Z"
std::string format_timestamp(Timestamp t);
// Accepts the format produced by format_timestamp; throws compass::Error otherwise.
Timestamp parse_timestamp(std::string_view text);

}  // namespace compass
