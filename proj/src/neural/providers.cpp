#include "compass/neural/providers.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "compass/common/digest.hpp"
#include "compass/common/text.hpp"

namespace compass::neural {
namespace {

constexpr std::size_t kSnippetBytes = 200;

struct BaseUrl {
  std::string origin;
  std::string prefix;  // no trailing slash
};

BaseUrl split_base_url(const std::string& id, const std::string& url) {
  static const std::regex re(R"(^(https?://[^/?#]+)(/[^?#]*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re))
    throw ValidationError("invalid provider configuration", {id + ": base_url '" + url + "' is not http(s)"});
  std::string prefix = m[2].matched ? m[2].str() : "";
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

std::string redact(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  for (auto pos = text.find(secret); pos != std::string::npos; pos = text.find(secret, pos))
    text.replace(pos, secret.size(), "[redacted]");
  return text;
}

std::string resolve_key(const SecretStore& secrets, const LlmRequest& req,
                        const RemoteProviderOptions& options) {
  const std::string& ref = req.config.api_key_ref.empty() ? options.default_key_ref : req.config.api_key_ref;
  auto key = secrets.resolve(ref);
  if (key.empty())
    throw PreconditionError("no API key resolvable for provider '" + options.id + "' (reference '" + ref + "')");
  return key;
}

// Sends one JSON POST and maps failures onto ProviderError.
nlohmann::json post_json(const RemoteProviderOptions& options, const std::string& path,
                         const httplib::Headers& headers, const nlohmann::json& body,
                         const std::string& secret) {
  auto base = split_base_url(options.id, options.base_url);
  httplib::Client client(base.origin);
  client.set_connection_timeout(options.timeout);
  client.set_read_timeout(options.timeout);
  client.set_write_timeout(options.timeout);

  auto res = client.Post(base.prefix + path, headers, body.dump(), "application/json");
  if (!res) {
    throw ProviderError(ProviderErrorKind::transport, options.id,
                        "transport failure: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status < 200 || status >= 300) {
    auto snippet = redact(std::string(text::utf8_prefix(res->body, kSnippetBytes)), secret);
    ProviderErrorKind kind = ProviderErrorKind::bad_request;
    if (status == 401 || status == 403) kind = ProviderErrorKind::auth;
    else if (status == 429) kind = ProviderErrorKind::rate_limited;
    else if (status >= 500) kind = ProviderErrorKind::server;
    throw ProviderError(kind, options.id, "HTTP " + std::to_string(status) + ": " + snippet, status);
  }
  auto doc = nlohmann::json::parse(res->body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw ProviderError(ProviderErrorKind::malformed, options.id, "response is not a JSON object", status);
  return doc;
}

int word_count(std::string_view s) {
  int n = 0;
  bool in_word = false;
  for (char c : s) {
    bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace

// ---- OpenAI-compatible ----

OpenAiCompatibleProvider::OpenAiCompatibleProvider(RemoteProviderOptions options,
                                                   std::shared_ptr<const SecretStore> secrets)
    : options_(std::move(options)), secrets_(std::move(secrets)) {
  split_base_url(options_.id, options_.base_url);
}

nlohmann::json OpenAiCompatibleProvider::request_body(const LlmRequest& req) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : req.messages)
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  return {{"model", req.config.model_id},
          {"messages", std::move(messages)},
          {"temperature", req.config.temperature},
          {"max_tokens", req.config.max_output_tokens}};
}

LlmResponse OpenAiCompatibleProvider::complete(const LlmRequest& req) {
  const auto key = resolve_key(*secrets_, req, options_);
  const auto started = std::chrono::steady_clock::now();
  auto doc = post_json(options_, "/chat/completions", {{"Authorization", "Bearer " + key}},
                       request_body(req), key);

  LlmResponse out;
  out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  const auto choices = doc.value("choices", nlohmann::json::array());
  if (!choices.is_array() || choices.empty() || !choices[0].is_object())
    throw ProviderError(ProviderErrorKind::malformed, options_.id, "response has no choices");
  const auto& choice = choices[0];
  const auto message = choice.value("message", nlohmann::json::object());
  if (message.contains("refusal") && message["refusal"].is_string()) {
    out.refusal = true;
    out.content = message["refusal"].get<std::string>();
  } else if (message.contains("content") && message["content"].is_string()) {
    out.content = message["content"].get<std::string>();
  }
  if (choice.value("finish_reason", std::string{}) == "length") out.truncated = true;
  if (choice.value("finish_reason", std::string{}) == "content_filter") out.refusal = true;
  if (out.content.empty() && !out.refusal)
    throw ProviderError(ProviderErrorKind::malformed, options_.id, "response content is empty");
  if (doc.contains("usage") && doc["usage"].is_object()) {
    out.usage.input = doc["usage"].value("prompt_tokens", 0);
    out.usage.output = doc["usage"].value("completion_tokens", 0);
  }
  return out;
}

// ---- Google ----

GoogleProvider::GoogleProvider(RemoteProviderOptions options, std::shared_ptr<const SecretStore> secrets)
    : options_(std::move(options)), secrets_(std::move(secrets)) {
  split_base_url(options_.id, options_.base_url);
}

nlohmann::json GoogleProvider::request_body(const LlmRequest& req) {
  nlohmann::json system_parts = nlohmann::json::array();
  nlohmann::json contents = nlohmann::json::array();
  for (const auto& m : req.messages) {
    if (m.role == Role::system) {
      system_parts.push_back({{"text", m.content}});
      continue;
    }
    contents.push_back({{"role", m.role == Role::assistant ? "model" : "user"},
                        {"parts", nlohmann::json::array({{{"text", m.content}}})}});
  }
  nlohmann::json body = {{"contents", std::move(contents)},
                         {"generationConfig",
                          {{"temperature", req.config.temperature},
                           {"maxOutputTokens", req.config.max_output_tokens}}}};
  if (!system_parts.empty()) body["systemInstruction"] = {{"parts", std::move(system_parts)}};
  return body;
}

LlmResponse GoogleProvider::complete(const LlmRequest& req) {
  const auto key = resolve_key(*secrets_, req, options_);
  const auto started = std::chrono::steady_clock::now();
  auto doc = post_json(options_, "/models/" + req.config.model_id + ":generateContent",
                       {{"x-goog-api-key", key}}, request_body(req), key);

  LlmResponse out;
  out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  if (doc.contains("promptFeedback") && doc["promptFeedback"].contains("blockReason")) {
    out.refusal = true;
    out.content = "blocked: " + doc["promptFeedback"]["blockReason"].get<std::string>();
    return out;
  }
  const auto candidates = doc.value("candidates", nlohmann::json::array());
  if (!candidates.is_array() || candidates.empty())
    throw ProviderError(ProviderErrorKind::malformed, options_.id, "response has no candidates");
  const auto& cand = candidates[0];
  if (cand.contains("content") && cand["content"].contains("parts")) {
    for (const auto& part : cand["content"]["parts"]) {
      if (part.contains("text") && part["text"].is_string()) out.content += part["text"].get<std::string>();
    }
  }
  const auto reason = cand.value("finishReason", std::string{});
  if (reason == "MAX_TOKENS") out.truncated = true;
  if (reason == "SAFETY" || reason == "RECITATION") out.refusal = true;
  if (out.content.empty() && !out.refusal)
    throw ProviderError(ProviderErrorKind::malformed, options_.id, "response content is empty");
  if (doc.contains("usageMetadata")) {
    out.usage.input = doc["usageMetadata"].value("promptTokenCount", 0);
    out.usage.output = doc["usageMetadata"].value("candidatesTokenCount", 0);
  }
  return out;
}

// ---- Mock ----

MockTranscript MockTranscript::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("invalid mock transcript", {"expected an object"});
  MockTranscript t;
  std::vector<std::string> problems;
  if (doc.contains("by_digest")) {
    for (const auto& [k, v] : doc["by_digest"].items()) {
      if (v.is_string()) t.by_digest[k] = v.get<std::string>();
      else problems.push_back("by_digest/" + k + ": reply must be a string");
    }
  }
  if (doc.contains("rules")) {
    std::size_t i = 0;
    for (const auto& r : doc["rules"]) {
      Rule rule;
      const auto where = "rules/" + std::to_string(i++);
      if (!r.is_object() || !r.contains("reply") || !r["reply"].is_string()) {
        problems.push_back(where + ": needs a string reply");
        continue;
      }
      rule.reply = r["reply"].get<std::string>();
      auto read = [&](const char* key, std::vector<std::string>& into) {
        const auto c = r.value(key, nlohmann::json::array());
        if (c.is_string()) {
          into.push_back(c.get<std::string>());
        } else if (c.is_array() && std::all_of(c.begin(), c.end(), [](const auto& x) { return x.is_string(); })) {
          for (const auto& x : c) into.push_back(x.get<std::string>());
        } else {
          problems.push_back(where + ": " + key + " must be a string or an array of strings");
          return false;
        }
        return true;
      };
      if (!read("contains", rule.contains) || !read("context_contains", rule.context_contains)) continue;
      t.rules.push_back(std::move(rule));
    }
  }
  if (doc.contains("by_ordinal")) {
    for (const auto& v : doc["by_ordinal"]) t.by_ordinal.push_back(v.get<std::string>());
  }
  if (doc.contains("default") && doc["default"].is_string()) t.fallback = doc["default"].get<std::string>();
  if (!problems.empty()) throw ValidationError("invalid mock transcript", std::move(problems));
  return t;
}

MockTranscript MockTranscript::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("mock transcript not found: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto doc = nlohmann::json::parse(buf.str(), nullptr, false);
  if (doc.is_discarded()) throw ValidationError("invalid mock transcript", {path + ": not JSON"});
  return from_json(doc);
}

MockTranscript MockTranscript::always(std::string reply) {
  MockTranscript t;
  t.fallback = std::move(reply);
  return t;
}

std::string request_digest(const LlmRequest& req) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : req.messages)
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  return json_digest({{"provider_id", req.config.provider_id},
                      {"model_id", req.config.model_id},
                      {"temperature", req.config.temperature},
                      {"messages", std::move(messages)}});
}

LlmResponse MockProvider::complete(const LlmRequest& req) {
  const int ordinal = calls_.fetch_add(1);

  std::string prompt;
  for (const auto& m : req.messages) {
    prompt += m.content;
    prompt += '\n';
  }

  std::optional<std::string> reply;
  if (!transcript_.by_digest.empty()) {
    auto it = transcript_.by_digest.find(request_digest(req));
    if (it != transcript_.by_digest.end()) reply = it->second;
  }
  if (!reply) {
    const std::string& last = req.messages.back().content;
    auto all_in = [](const std::vector<std::string>& needles, const std::string& hay) {
      return std::all_of(needles.begin(), needles.end(),
                         [&](const std::string& n) { return hay.find(n) != std::string::npos; });
    };
    for (const auto& rule : transcript_.rules) {
      if (all_in(rule.contains, last) && all_in(rule.context_contains, prompt)) {
        reply = rule.reply;
        break;
      }
    }
  }
  if (!reply && ordinal < static_cast<int>(transcript_.by_ordinal.size())) reply = transcript_.by_ordinal[ordinal];
  if (!reply) reply = transcript_.fallback;

  LlmResponse out;
  out.usage.input = word_count(prompt);
  if (!reply) {
    out.refusal = true;
    out.content = "The mock transcript has no reply for this request.";
    return out;
  }

  // Output budget counted in words.
  if (word_count(*reply) > req.config.max_output_tokens) {
    std::string cut;
    int words = 0;
    bool in_word = false;
    for (char c : *reply) {
      bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
      if (!space && !in_word && ++words > req.config.max_output_tokens) break;
      in_word = !space;
      cut += c;
    }
    out.content = text::trim(cut);
    out.truncated = true;
  } else {
    out.content = *reply;
  }
  out.usage.output = word_count(out.content);
  return out;
}

// ---- settings ----

ProviderSettings ProviderSettings::from_json(const nlohmann::json& doc) {
  ProviderSettings s;
  s.id = doc.at("id").get<std::string>();
  const auto kind = doc.value("kind", std::string("openai-compatible"));
  if (kind == "openai-compatible") s.kind = ProviderKind::openai_compatible;
  else if (kind == "google") s.kind = ProviderKind::google;
  else if (kind == "mock") s.kind = ProviderKind::mock;
  else throw ValidationError("invalid provider configuration", {s.id + ": unknown kind '" + kind + "'"});
  s.base_url = doc.value("base_url", std::string{});
  s.key_ref = doc.value("key_ref", std::string{});
  s.max_in_flight = doc.value("max_in_flight", s.max_in_flight);
  s.timeout = std::chrono::milliseconds(doc.value("timeout_ms", static_cast<int>(s.timeout.count())));
  s.transcript_path = doc.value("transcript", std::string{});
  return s;
}

std::vector<ProviderSettings> builtin_remote_providers() {
  using K = ProviderKind;
  auto remote = [](std::string id, K kind, std::string url, std::string key) {
    ProviderSettings s;
    s.id = std::move(id);
    s.kind = kind;
    s.base_url = std::move(url);
    s.key_ref = std::move(key);
    return s;
  };
  return {
      remote("openai", K::openai_compatible, "https://api.openai.com/v1", "env:OPENAI_API_KEY"),
      remote("groq", K::openai_compatible, "https://api.groq.com/openai/v1", "env:GROQ_API_KEY"),
      remote("mistral", K::openai_compatible, "https://api.mistral.ai/v1", "env:MISTRAL_API_KEY"),
      remote("google", K::google, "https://generativelanguage.googleapis.com/v1beta", "env:GOOGLE_API_KEY"),
      remote("openai-compatible", K::openai_compatible, "http://127.0.0.1:11434/v1", "env:COMPASS_LLM_API_KEY"),
  };
}

std::shared_ptr<ProviderRegistry> build_registry(const std::vector<ProviderSettings>& settings,
                                                 std::shared_ptr<const SecretStore> secrets) {
  auto registry = std::make_shared<ProviderRegistry>();
  for (const auto& s : settings) {
    RemoteProviderOptions opts{s.id, s.base_url, s.timeout, s.key_ref};
    switch (s.kind) {
      case ProviderKind::openai_compatible:
        registry->add(std::make_shared<OpenAiCompatibleProvider>(opts, secrets), s.max_in_flight);
        break;
      case ProviderKind::google:
        registry->add(std::make_shared<GoogleProvider>(opts, secrets), s.max_in_flight);
        break;
      case ProviderKind::mock:
        registry->add(std::make_shared<MockProvider>(
                          s.transcript_path.empty() ? MockTranscript{} : MockTranscript::from_file(s.transcript_path),
                          s.id),
                      s.max_in_flight);
        break;
    }
    spdlog::debug("registered LLM provider {}", s.id);
  }
  return registry;
}

}  // namespace compass::neural
