#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "compass/catalog/catalog.hpp"
#include "compass/neural/neural_layer.hpp"
#include "compass/pipeline/outcome.hpp"
#include "compass/session/session_store.hpp"
#include "compass/sparql/gateway.hpp"

namespace compass::pipeline {

enum class RefineTarget { query, chart, interpretation };
enum class RefineMode { manual, prompt };

std::string_view to_string(RefineTarget t);
std::string_view to_string(RefineMode m);
RefineTarget refine_target_from_string(std::string_view name);
RefineMode refine_mode_from_string(std::string_view name);

// A rejected refinement. The session keeps its earlier outcomes untouched.
class RefinementError : public Error {
 public:
  RefinementError(const std::string& message, std::vector<std::string> diagnostics)
      : Error("refinement_error", message), diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

struct PipelineDeps {
  std::shared_ptr<const schema::SchemaRegistry> schemas;
  std::shared_ptr<const catalog::Catalog> catalog;
  std::shared_ptr<session::SessionStore> sessions;
  std::shared_ptr<neural::NeuralLayer> neural;  // optional; custom questions need it
  // endpoint_ref of a use case -> endpoint
  std::map<std::string, sparql::EndpointConfig> endpoints;
  std::chrono::milliseconds cache_ttl{0};
};

// Parse and schema diagnostics for a candidate query; empty when usable.
std::vector<std::string> query_diagnostics(const std::string& text, const schema::GraphSchema& schema);

class Pipeline {
 public:
  explicit Pipeline(PipelineDeps deps);

  // Runs within one session are serialized; different sessions run in parallel.
  QuestionOutcome run_curated(const std::string& use_case_id, int index, const std::string& session_id);
  QuestionOutcome run_custom(const std::string& question, const std::string& use_case_id,
                             const std::string& session_id, const neural::LlmConfig& cfg);
  // `cfg` is needed in prompt mode; it defaults to the configuration the
  // referenced outcome was produced with.
  QuestionOutcome refine(const std::string& session_id, const std::string& outcome_id,
                         const std::string& instruction, RefineTarget target, RefineMode mode,
                         const std::optional<neural::LlmConfig>& cfg = std::nullopt);

  const PipelineDeps& deps() const { return deps_; }
  const sparql::Gateway& gateway() const { return gateway_; }

 private:
  struct Context;

  sparql::EndpointConfig endpoint_for(const std::string& use_case_id) const;
  bool execute_and_process(Context& ctx);
  void visualize_custom(Context& ctx, const neural::LlmConfig& cfg);
  void visualize_curated(Context& ctx, const viz::ChartSpec& chart, const neural::Interpretation& interp);
  QuestionOutcome finish(Context& ctx, const nlohmann::json* refinement_event = nullptr);

  PipelineDeps deps_;
  sparql::Gateway gateway_;
};

}  // namespace compass::pipeline
