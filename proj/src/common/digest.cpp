#include "compass/common/digest.hpp"

#include <array>
#include <cstdio>

#include <openssl/evp.h>

#include "compass/common/error.hpp"

namespace compass {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("internal", "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0x0f]);
  }
  return out;
}

std::string canonical_json(const nlohmann::json& value) {
  // nlohmann::json stores objects in std::map, so dump() already emits
  // sorted keys; strict UTF-8 handling keeps the digest well defined.
  return value.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

}  // namespace compass
