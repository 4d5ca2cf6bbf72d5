#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "compass/schema/schema_registry.hpp"
#include "compass/session/session_store.hpp"

namespace compass::session {

inline constexpr int kBundleVersion = 1;
inline constexpr std::string_view kBundleExtension = ".cqbundle.json";

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& message) : Error("integrity_error", message) {}
};

class BundleVersionError : public Error {
 public:
  explicit BundleVersionError(int version)
      : Error("unsupported_bundle_version",
              "bundle_version " + std::to_string(version) + " is not supported (expected " +
                  std::to_string(kBundleVersion) + ")") {}
};

class SecretLeakError : public Error {
 public:
  SecretLeakError() : Error("secret_leak", "export refused: bundle would contain secret material") {}
};

// Bundle document for one outcome with content_digest set. `secrets` are
// scanned for in the serialized bundle.
nlohmann::json make_bundle(const pipeline::QuestionOutcome& outcome, const std::vector<std::string>& secrets = {});
nlohmann::json export_bundle(const SessionStore& store, const std::string& session_id,
                             const std::string& outcome_id, const std::vector<std::string>& secrets = {});

// SHA-256 over the canonical form of every member except content_digest.
std::string bundle_digest(const nlohmann::json& bundle);

// Parses and verifies a bundle; throws IntegrityError or BundleVersionError.
nlohmann::json verify_bundle(std::string_view text);

// Outcome reconstructed from a verified bundle (no ids, imported = true).
pipeline::QuestionOutcome outcome_from_bundle(const nlohmann::json& bundle);

struct ImportResult {
  std::string session_id;
  std::string outcome_id;
  std::vector<std::string> warnings;
};

// Seeds a new session with the bundle's events. A schema fingerprint that
// differs from the registered schema adds a warning note event.
ImportResult import_bundle(SessionStore& store, const schema::SchemaRegistry& schemas, std::string_view text,
                           const std::string& owner);

// Bundle with created_at, digest and timestamps removed.
nlohmann::json normalized_bundle(const nlohmann::json& bundle);

}  // namespace compass::session
