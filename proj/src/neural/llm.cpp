#include "compass/neural/llm.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace compass::neural {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view name) {
  if (name == "system") return Role::system;
  if (name == "user") return Role::user;
  if (name == "assistant") return Role::assistant;
  throw Error("invalid_value", "unknown chat role '" + std::string(name) + "'");
}

void LlmConfig::validate() const {
  std::vector<std::string> problems;
  if (provider_id.empty()) problems.push_back("provider_id is empty");
  if (model_id.empty()) problems.push_back("model_id is empty");
  if (!(temperature >= 0.0 && temperature <= 2.0))
    problems.push_back("temperature " + std::to_string(temperature) + " outside [0, 2]");
  if (max_output_tokens <= 0) problems.push_back("max_output_tokens must be positive");
  if (!problems.empty()) throw ValidationError("invalid LLM configuration", std::move(problems));
}

nlohmann::json redacted_json(const LlmConfig& cfg) {
  return {{"provider_id", cfg.provider_id},
          {"model_id", cfg.model_id},
          {"temperature", cfg.temperature},
          {"max_output_tokens", cfg.max_output_tokens}};
}

LlmConfig config_from_json(const nlohmann::json& doc) {
  LlmConfig cfg;
  if (!doc.is_object()) throw ValidationError("invalid LLM configuration", {"expected an object"});
  cfg.provider_id = doc.value("provider_id", cfg.provider_id);
  cfg.model_id = doc.value("model_id", cfg.model_id);
  cfg.temperature = doc.value("temperature", cfg.temperature);
  cfg.max_output_tokens = doc.value("max_output_tokens", cfg.max_output_tokens);
  cfg.api_key_ref = doc.value("api_key_ref", std::string{});
  cfg.validate();
  return cfg;
}

SecretStore SecretStore::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("secrets file not found: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto doc = nlohmann::json::parse(buf.str(), nullptr, false);
  if (!doc.is_object()) throw ValidationError("invalid secrets file", {path + ": expected an object"});
  std::map<std::string, std::string> values;
  for (const auto& [k, v] : doc.items()) {
    if (v.is_string()) values[k] = v.get<std::string>();
  }
  return SecretStore(std::move(values));
}

std::string SecretStore::resolve(const std::string& ref) const {
  if (ref.rfind("env:", 0) == 0) {
    const char* v = std::getenv(ref.substr(4).c_str());
    return v ? std::string(v) : std::string{};
  }
  if (ref.rfind("secret:", 0) == 0) {
    auto it = file_secrets_.find(ref.substr(7));
    return it == file_secrets_.end() ? std::string{} : it->second;
  }
  return {};
}

std::vector<std::string> SecretStore::known_values(const std::vector<std::string>& refs) const {
  std::vector<std::string> out;
  for (const auto& r : refs) {
    auto v = resolve(r);
    if (!v.empty()) out.push_back(std::move(v));
  }
  for (const auto& [_, v] : file_secrets_) {
    if (!v.empty()) out.push_back(v);
  }
  return out;
}

void ProviderRegistry::add(std::shared_ptr<Provider> provider, int max_in_flight) {
  auto s = std::make_shared<Slot>();
  s->provider = std::move(provider);
  s->max_in_flight = max_in_flight;
  std::lock_guard lock(mutex_);
  slots_[s->provider->id()] = std::move(s);
}

bool ProviderRegistry::has(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return slots_.count(id) > 0;
}

std::vector<std::string> ProviderRegistry::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : slots_) out.push_back(id);
  return out;
}

std::shared_ptr<ProviderRegistry::Slot> ProviderRegistry::slot(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = slots_.find(id);
  if (it == slots_.end()) throw PreconditionError("provider '" + id + "' is not registered");
  return it->second;
}

LlmResponse ProviderRegistry::complete(const LlmRequest& req) {
  if (req.messages.empty()) throw PreconditionError("LLM request has no messages");
  if (req.messages.front().role != Role::system)
    throw PreconditionError("first message of an LLM request must have the system role");
  req.config.validate();
  auto s = slot(req.config.provider_id);

  {
    std::unique_lock lock(s->mutex);
    if (s->max_in_flight > 0) {
      s->cv.wait(lock, [&] { return s->in_flight < s->max_in_flight; });
    }
    ++s->in_flight;
  }
  struct Release {
    Slot& s;
    ~Release() {
      {
        std::lock_guard lock(s.mutex);
        --s.in_flight;
      }
      s.cv.notify_one();
    }
  } release{*s};

  return s->provider->complete(req);
}

std::vector<std::string> find_secrets(std::string_view text, const std::vector<std::string>& secrets) {
  std::vector<std::string> hits;
  for (const auto& s : secrets) {
    if (!s.empty() && text.find(s) != std::string_view::npos) hits.push_back(s);
  }
  return hits;
}

}  // namespace compass::neural
