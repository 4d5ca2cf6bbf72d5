#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace compass {

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

// Canonical JSON text: object keys sorted, no insignificant whitespace.
std::string canonical_json(const nlohmann::json& value);

inline std::string json_digest(const nlohmann::json& value) {
  return sha256_hex(canonical_json(value));
}

}  // namespace compass
