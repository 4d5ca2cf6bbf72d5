#pragma once

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "compass/common/error.hpp"

namespace compass::neural {

inline constexpr std::string_view kDefaultProvider = "openai";
inline constexpr std::string_view kDefaultModel = "gpt-4o-mini";

enum class Role { system, user, assistant };

std::string_view to_string(Role r);
Role role_from_string(std::string_view name);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct LlmConfig {
  std::string provider_id{kDefaultProvider};
  std::string model_id{kDefaultModel};
  double temperature = 0.0;
  int max_output_tokens = 1024;
  // Opaque reference such as "env:OPENAI_API_KEY"; resolved by SecretStore
  // and never serialized.
  std::string api_key_ref;

  // Throws ValidationError on out-of-range values.
  void validate() const;
  bool operator==(const LlmConfig&) const = default;
};

// Provider and model only; the form written into histories and bundles.
nlohmann::json redacted_json(const LlmConfig& cfg);
LlmConfig config_from_json(const nlohmann::json& doc);

struct LlmRequest {
  LlmConfig config;
  std::vector<ChatMessage> messages;
};

struct TokenUsage {
  int input = 0;
  int output = 0;
  bool operator==(const TokenUsage&) const = default;
};

struct LlmResponse {
  std::string content;
  TokenUsage usage;
  std::chrono::milliseconds latency{0};
  bool truncated = false;
  bool refusal = false;
};

enum class ProviderErrorKind { transport, auth, rate_limited, server, bad_request, malformed };

class ProviderError : public Error {
 public:
  ProviderError(ProviderErrorKind kind, const std::string& provider, const std::string& message,
                int status = 0)
      : Error(kind == ProviderErrorKind::auth ? "provider_auth_error" : "provider_error",
              "provider '" + provider + "': " + message),
        kind_(kind),
        status_(status) {}

  ProviderErrorKind kind() const noexcept { return kind_; }
  int status() const noexcept { return status_; }
  bool retriable() const noexcept {
    return kind_ == ProviderErrorKind::transport || kind_ == ProviderErrorKind::rate_limited ||
           kind_ == ProviderErrorKind::server;
  }

 private:
  ProviderErrorKind kind_;
  int status_;
};

// Resolves api_key_ref values. "env:NAME" reads the environment; "secret:NAME"
// reads the secrets file given at construction.
class SecretStore {
 public:
  SecretStore() = default;
  explicit SecretStore(std::map<std::string, std::string> file_secrets)
      : file_secrets_(std::move(file_secrets)) {}
  static SecretStore from_file(const std::string& path);

  // Empty when the reference cannot be resolved.
  std::string resolve(const std::string& ref) const;
  // Every secret value this store can produce for the given references.
  std::vector<std::string> known_values(const std::vector<std::string>& refs) const;

 private:
  std::map<std::string, std::string> file_secrets_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string id() const = 0;
  virtual bool remote() const = 0;
  virtual LlmResponse complete(const LlmRequest& req) = 0;
};

// Provider lookup plus per-provider in-flight limits.
class ProviderRegistry {
 public:
  // max_in_flight <= 0 means unlimited.
  void add(std::shared_ptr<Provider> provider, int max_in_flight = 0);
  bool has(const std::string& id) const;
  std::vector<std::string> ids() const;

  // Validates the request and dispatches it. Throws PreconditionError for
  // empty messages or a first message that is not a system message.
  LlmResponse complete(const LlmRequest& req);

 private:
  struct Slot {
    std::shared_ptr<Provider> provider;
    int max_in_flight = 0;
    int in_flight = 0;
    std::mutex mutex;
    std::condition_variable cv;
  };
  std::shared_ptr<Slot> slot(const std::string& id) const;

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

// Sentinel-style scan: every secret value that occurs in `text`.
std::vector<std::string> find_secrets(std::string_view text, const std::vector<std::string>& secrets);

}  // namespace compass::neural
