#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "compass/neural/llm.hpp"

namespace compass::neural {

struct RemoteProviderOptions {
  std::string id;        // "openai", "groq", "mistral", "google"
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::chrono::milliseconds timeout{60000};
  std::string default_key_ref;  // used when the request carries no api_key_ref
};

// Chat-completions wire format shared by OpenAI, Groq and Mistral.
class OpenAiCompatibleProvider : public Provider {
 public:
  OpenAiCompatibleProvider(RemoteProviderOptions options, std::shared_ptr<const SecretStore> secrets);
  std::string id() const override { return options_.id; }
  bool remote() const override { return true; }
  LlmResponse complete(const LlmRequest& req) override;

  static nlohmann::json request_body(const LlmRequest& req);

 private:
  RemoteProviderOptions options_;
  std::shared_ptr<const SecretStore> secrets_;
};

// generateContent wire format of the Google generative language API.
class GoogleProvider : public Provider {
 public:
  GoogleProvider(RemoteProviderOptions options, std::shared_ptr<const SecretStore> secrets);
  std::string id() const override { return options_.id; }
  bool remote() const override { return true; }
  LlmResponse complete(const LlmRequest& req) override;

  static nlohmann::json request_body(const LlmRequest& req);

 private:
  RemoteProviderOptions options_;
  std::shared_ptr<const SecretStore> secrets_;
};

// Scripted replies for tests and offline demos.
//
// Transcript document:
//   { "by_digest": { "<sha256 of request>": "reply", ... },
//     "rules": [ { "contains": "text" | ["all", "of", "these"],
//                  "context_contains": [...], "reply": "..." }, ... ],
//     "by_ordinal": [ "first reply", "second reply", ... ],
//     "default": "reply" }
// `contains` is matched against the last message, `context_contains` against
// every message. Lookup order: digest, first matching rule, ordinal (call
// number), default.
// With no match the provider answers with a refusal.
struct MockTranscript {
  struct Rule {
    std::vector<std::string> contains;
    std::vector<std::string> context_contains;
    std::string reply;
  };
  std::map<std::string, std::string> by_digest;
  std::vector<Rule> rules;
  std::vector<std::string> by_ordinal;
  std::optional<std::string> fallback;

  static MockTranscript from_json(const nlohmann::json& doc);
  static MockTranscript from_file(const std::string& path);
  static MockTranscript always(std::string reply);
};

// Digest identifying a request for transcript lookup: provider, model,
// temperature and the ordered messages.
std::string request_digest(const LlmRequest& req);

class MockProvider : public Provider {
 public:
  explicit MockProvider(MockTranscript transcript, std::string id = "mock")
      : transcript_(std::move(transcript)), id_(std::move(id)) {}
  std::string id() const override { return id_; }
  bool remote() const override { return false; }
  LlmResponse complete(const LlmRequest& req) override;

  int calls() const { return calls_.load(); }

 private:
  MockTranscript transcript_;
  std::string id_;
  std::atomic<int> calls_{0};
};

enum class ProviderKind { openai_compatible, google, mock };

struct ProviderSettings {
  std::string id;
  ProviderKind kind = ProviderKind::openai_compatible;
  std::string base_url;
  std::string key_ref;
  int max_in_flight = 4;
  std::chrono::milliseconds timeout{60000};
  std::string transcript_path;  // mock only

  static ProviderSettings from_json(const nlohmann::json& doc);
};

// openai, groq, mistral, google and a generic OpenAI-compatible endpoint.
std::vector<ProviderSettings> builtin_remote_providers();

std::shared_ptr<ProviderRegistry> build_registry(const std::vector<ProviderSettings>& settings,
                                                 std::shared_ptr<const SecretStore> secrets);

}  // namespace compass::neural
