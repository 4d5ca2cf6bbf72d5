#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "compass/common/time.hpp"
#include "compass/neural/llm.hpp"
#include "compass/schema/graph_schema.hpp"
#include "compass/viz/chart.hpp"

namespace compass::neural {

inline constexpr int kMaxRepairAttempts = 3;
inline constexpr std::size_t kInterpretationRowCap = 50;
inline constexpr std::size_t kPromptSchemaBudget = 6000;

struct CandidateQuery {
  std::string sparql_text;
  std::string rationale;  // display only
  int attempt = 1;
  std::vector<std::string> diagnostics;

  bool operator==(const CandidateQuery&) const = default;
};

nlohmann::json to_json(const CandidateQuery& c);
CandidateQuery candidate_from_json(const nlohmann::json& doc);

enum class GeneratorKind { curated, llm, manual };

struct Interpretation {
  std::string summary;
  std::string explanation;
  std::vector<std::string> caveats;
  GeneratorKind generator = GeneratorKind::curated;
  std::string model_id;  // set when generator == llm

  // "curated", "manual" or "llm(<model>)"
  std::string generator_label() const;
  bool operator==(const Interpretation&) const = default;
};

nlohmann::json to_json(const Interpretation& i);
Interpretation interpretation_from_json(const nlohmann::json& doc);

// One LLM round trip as recorded in step traces.
struct LlmExchange {
  std::string task;  // generate-query, repair-query, interpret-results, ...
  std::string provider_id;
  std::string model_id;
  std::string request_digest;
  std::vector<ChatMessage> messages;
  std::string response;
  TokenUsage usage;
  bool truncated = false;
  bool refusal = false;
  std::string error;  // empty on success
  Timestamp started_at{};
  std::chrono::milliseconds latency{0};
};

nlohmann::json to_json(const LlmExchange& e);
LlmExchange exchange_from_json(const nlohmann::json& doc);

using ExchangeLog = std::vector<LlmExchange>;

class ExtractionError : public Error {
 public:
  ExtractionError(int attempt, std::string raw_output)
      : Error("extraction_error", "model output contains no fenced query block (attempt " +
                                      std::to_string(attempt) + ")"),
        attempt_(attempt),
        raw_output_(std::move(raw_output)) {}
  int attempt() const noexcept { return attempt_; }
  const std::string& raw_output() const noexcept { return raw_output_; }

 private:
  int attempt_;
  std::string raw_output_;
};

class RepairExhaustedError : public Error {
 public:
  RepairExhaustedError(int attempts, std::vector<std::string> history)
      : Error("repair_exhausted", compose(attempts, history)), history_(std::move(history)) {}
  const std::vector<std::string>& history() const noexcept { return history_; }

 private:
  static std::string compose(int attempts, const std::vector<std::string>& history) {
    std::string out = "no valid query after " + std::to_string(attempts) + " attempt(s)";
    for (const auto& h : history) out += "\n  - " + h;
    return out;
  }
  std::vector<std::string> history_;
};

// Text of the last fenced block in `output`, or nullopt.
std::optional<std::string> extract_last_fenced_block(std::string_view output);

struct NeuralOptions {
  int max_repair_attempts = kMaxRepairAttempts;
  std::size_t interpretation_row_cap = kInterpretationRowCap;
  std::size_t schema_budget = kPromptSchemaBudget;
};

// Every operation issues its LLM calls sequentially and appends one
// LlmExchange per call to `log` when given, including failed calls.
class NeuralLayer {
 public:
  explicit NeuralLayer(std::shared_ptr<ProviderRegistry> providers, NeuralOptions options = {});

  const NeuralOptions& options() const { return options_; }
  ProviderRegistry& providers() { return *providers_; }

  LlmResponse complete(const LlmRequest& req, const std::string& task = "complete",
                       ExchangeLog* log = nullptr);

  CandidateQuery generate_query(const std::string& question, const schema::GraphSchema& schema,
                                const std::vector<ChatMessage>& history, const LlmConfig& cfg,
                                ExchangeLog* log = nullptr);

  CandidateQuery repair_query(const CandidateQuery& prev, const std::vector<std::string>& diagnostics,
                              const schema::GraphSchema& schema,
                              const std::vector<ChatMessage>& history, const LlmConfig& cfg,
                              ExchangeLog* log = nullptr);

  Interpretation interpret_results(const std::string& question, const viz::Dataset& data,
                                   const viz::ChartSpec& chart, const LlmConfig& cfg,
                                   ExchangeLog* log = nullptr);

  // Prompt-mode refinement. The returned candidate has attempt 1 and still
  // has to pass the caller's parse and schema checks.
  CandidateQuery refine_query(const std::string& current_query, const std::string& instruction,
                              const schema::GraphSchema& schema, const std::vector<ChatMessage>& history,
                              const LlmConfig& cfg, ExchangeLog* log = nullptr);

  // Throws ValidationError when neither the reply nor its one repair round
  // yields a chart valid for `data`.
  viz::ChartSpec refine_chart(const std::string& instruction, const viz::ChartSpec& current,
                              const viz::Dataset& data, const LlmConfig& cfg, ExchangeLog* log = nullptr);

  Interpretation refine_interpretation(const std::string& instruction, const Interpretation& current,
                                       const std::string& question, const viz::Dataset& data,
                                       const LlmConfig& cfg, ExchangeLog* log = nullptr);

  // Never throws for model misbehaviour; `notes` receives fallback reasons.
  viz::ChartSpec suggest_chart(const std::string& question, const viz::Dataset& data,
                               const LlmConfig& cfg, ExchangeLog* log = nullptr,
                               std::vector<std::string>* notes = nullptr);

 private:
  // One suggestion plus at most one repair round; empty problems on success.
  std::vector<std::string> chart_round_trip(const std::string& task, std::vector<ChatMessage> messages,
                                            const viz::Dataset& data, const LlmConfig& cfg,
                                            ExchangeLog* log, viz::ChartSpec& out);
  LlmResponse call(const std::string& task, const LlmConfig& cfg, std::vector<ChatMessage> messages,
                   ExchangeLog* log);

  std::shared_ptr<ProviderRegistry> providers_;
  NeuralOptions options_;
};

// Prompt assembly, exposed for inspection.
namespace prompts {

std::vector<ChatMessage> generate_query(const std::string& question, const schema::GraphSchema& schema,
                                        const std::vector<ChatMessage>& history,
                                        std::size_t schema_budget);
std::vector<ChatMessage> repair_query(const CandidateQuery& prev,
                                      const std::vector<std::string>& diagnostics,
                                      const schema::GraphSchema& schema,
                                      const std::vector<ChatMessage>& history,
                                      std::size_t schema_budget);
// `sampled` is set when rows beyond the cap were left out.
std::vector<ChatMessage> interpret_results(const std::string& question, const viz::Dataset& data,
                                           const viz::ChartSpec& chart, std::size_t row_cap,
                                           bool* sampled = nullptr);
std::vector<ChatMessage> suggest_chart(const std::string& question, const viz::Dataset& data);
std::vector<ChatMessage> refine_query(const std::string& current_query, const std::string& instruction,
                                      const schema::GraphSchema& schema,
                                      const std::vector<ChatMessage>& history, std::size_t schema_budget);
std::vector<ChatMessage> refine_chart(const std::string& instruction, const viz::ChartSpec& current,
                                      const viz::Dataset& data);
std::vector<ChatMessage> refine_interpretation(const std::string& instruction, const Interpretation& current,
                                               const std::string& question, const viz::Dataset& data,
                                               std::size_t row_cap);

}  // namespace prompts

}  // namespace compass::neural
