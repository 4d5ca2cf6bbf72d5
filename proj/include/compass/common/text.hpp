#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace compass::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix);
std::vector<std::string> split(std::string_view s, char delimiter);
std::string join(const std::vector<std::string>& parts, std::string_view delimiter);

// Longest prefix of `s` that is at most `max_bytes` long and does not split a
// UTF-8 sequence.
std::string_view utf8_prefix(std::string_view s, std::size_t max_bytes);

}  // namespace compass::text
