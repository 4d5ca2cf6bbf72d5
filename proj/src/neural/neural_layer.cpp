#include "compass/neural/neural_layer.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "compass/common/digest.hpp"
#include "compass/common/text.hpp"
#include "compass/neural/providers.hpp"

namespace compass::neural {

using nlohmann::json;

// ---- records ----

json to_json(const CandidateQuery& c) {
  return {{"sparql_text", c.sparql_text},
          {"rationale", c.rationale},
          {"attempt", c.attempt},
          {"diagnostics", c.diagnostics}};
}

CandidateQuery candidate_from_json(const json& doc) {
  CandidateQuery c;
  c.sparql_text = doc.at("sparql_text").get<std::string>();
  c.rationale = doc.value("rationale", std::string{});
  c.attempt = doc.value("attempt", 1);
  c.diagnostics = doc.value("diagnostics", std::vector<std::string>{});
  return c;
}

std::string Interpretation::generator_label() const {
  switch (generator) {
    case GeneratorKind::curated: return "curated";
    case GeneratorKind::manual: return "manual";
    case GeneratorKind::llm: return "llm(" + model_id + ")";
  }
  return "curated";
}

json to_json(const Interpretation& i) {
  return {{"summary", i.summary},
          {"explanation", i.explanation},
          {"caveats", i.caveats},
          {"generator", i.generator_label()}};
}

Interpretation interpretation_from_json(const json& doc) {
  Interpretation i;
  i.summary = doc.value("summary", std::string{});
  i.explanation = doc.value("explanation", std::string{});
  i.caveats = doc.value("caveats", std::vector<std::string>{});
  const auto gen = doc.value("generator", std::string("curated"));
  if (gen == "curated") {
    i.generator = GeneratorKind::curated;
  } else if (gen == "manual") {
    i.generator = GeneratorKind::manual;
  } else if (gen.rfind("llm(", 0) == 0 && gen.back() == ')') {
    i.generator = GeneratorKind::llm;
    i.model_id = gen.substr(4, gen.size() - 5);
  } else {
    throw ValidationError("invalid interpretation", {"unknown generator '" + gen + "'"});
  }
  return i;
}

namespace {

json messages_json(const std::vector<ChatMessage>& messages) {
  json out = json::array();
  for (const auto& m : messages) out.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  return out;
}

}  // namespace

json to_json(const LlmExchange& e) {
  json doc = {{"task", e.task},
              {"provider_id", e.provider_id},
              {"model_id", e.model_id},
              {"request_digest", e.request_digest},
              {"messages", messages_json(e.messages)},
              {"response", e.response},
              {"usage", {{"input", e.usage.input}, {"output", e.usage.output}}},
              {"truncated", e.truncated},
              {"refusal", e.refusal},
              {"started_at", format_timestamp(e.started_at)},
              {"latency_ms", e.latency.count()}};
  if (!e.error.empty()) doc["error"] = e.error;
  return doc;
}

LlmExchange exchange_from_json(const json& doc) {
  LlmExchange e;
  e.task = doc.at("task").get<std::string>();
  e.provider_id = doc.value("provider_id", std::string{});
  e.model_id = doc.value("model_id", std::string{});
  e.request_digest = doc.value("request_digest", std::string{});
  for (const auto& m : doc.value("messages", json::array()))
    e.messages.push_back({role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  e.response = doc.value("response", std::string{});
  if (doc.contains("usage")) {
    e.usage.input = doc["usage"].value("input", 0);
    e.usage.output = doc["usage"].value("output", 0);
  }
  e.truncated = doc.value("truncated", false);
  e.refusal = doc.value("refusal", false);
  e.error = doc.value("error", std::string{});
  if (doc.contains("started_at")) e.started_at = parse_timestamp(doc["started_at"].get<std::string>());
  e.latency = std::chrono::milliseconds(doc.value("latency_ms", 0));
  return e;
}

// ---- extraction ----

namespace {

struct Fence {
  std::size_t open_begin;  // start of the opening fence line
  std::size_t body_begin;
  std::size_t body_end;
  std::size_t close_end;  // one past the closing fence line
};

std::vector<Fence> find_fences(std::string_view s) {
  std::vector<Fence> out;
  bool open = false;
  std::size_t open_begin = 0, body_begin = 0;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto nl = s.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? s.size() : nl;
    std::string_view line = s.substr(pos, end - pos);
    auto first = line.find_first_not_of(" \t");
    bool fence = first != std::string_view::npos && line.substr(first, 3) == "```";
    std::size_t next = nl == std::string_view::npos ? s.size() + 1 : nl + 1;
    if (fence) {
      if (!open) {
        open = true;
        open_begin = pos;
        body_begin = std::min(next, s.size());
      } else {
        out.push_back({open_begin, body_begin, pos, std::min(next, s.size())});
        open = false;
      }
    }
    pos = next;
  }
  return out;
}

std::string strip_fences(std::string_view s) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& f : find_fences(s)) {
    out.append(s.substr(pos, f.open_begin - pos));
    pos = f.close_end;
  }
  if (pos < s.size()) out.append(s.substr(pos));
  return text::trim(out);
}

}  // namespace

std::optional<std::string> extract_last_fenced_block(std::string_view output) {
  auto fences = find_fences(output);
  for (auto it = fences.rbegin(); it != fences.rend(); ++it) {
    auto body = text::trim(output.substr(it->body_begin, it->body_end - it->body_begin));
    if (!body.empty()) return body;
  }
  return std::nullopt;
}

// ---- prompts ----

namespace prompts {
namespace {

std::string query_system_prompt(const schema::GraphSchema& schema, std::size_t budget) {
  std::ostringstream os;
  os << "You write SPARQL 1.1 SELECT or ASK queries over a scholarly knowledge graph.\n"
     << "Use only the classes and predicates of the graph schema below; do not invent IRIs.\n"
     << "Return exactly one query inside a fenced code block that starts with ```sparql and ends with ```.\n"
     << "Text outside the block is shown to the user as your reasoning.\n\n"
     << "Use case: " << schema.use_case_id << "\n"
     << "Schema fingerprint: " << schema.fingerprint << "\n"
     << "Graph schema:\n"
     << schema_summary(schema, budget);
  return os.str();
}

std::vector<ChatMessage> with_history(std::string system, const std::vector<ChatMessage>& history,
                                      std::string user) {
  std::vector<ChatMessage> out;
  out.push_back({Role::system, std::move(system)});
  for (const auto& m : history) {
    if (m.role != Role::system) out.push_back(m);
  }
  out.push_back({Role::user, std::move(user)});
  return out;
}

std::string column_listing(const viz::Dataset& data) {
  std::ostringstream os;
  for (std::size_t c = 0; c < data.columns.size(); ++c) {
    const auto& col = data.columns[c];
    std::set<std::string> distinct;
    std::size_t missing = 0;
    std::optional<viz::Cell> lo, hi;
    for (const auto& row : data.rows) {
      const auto& cell = row[c];
      if (viz::is_missing(cell)) {
        ++missing;
        continue;
      }
      distinct.insert(viz::cell_text(cell));
      if (!lo || cell < *lo) lo = cell;
      if (!hi || *hi < cell) hi = cell;
    }
    os << "- " << col.name << " (" << viz::to_string(col.type) << "): " << distinct.size() << " distinct";
    if (lo) os << ", min " << viz::cell_text(*lo) << ", max " << viz::cell_text(*hi);
    if (missing) os << ", " << missing << " missing";
    os << "\n";
  }
  return os.str();
}

}  // namespace

std::vector<ChatMessage> generate_query(const std::string& question, const schema::GraphSchema& schema,
                                        const std::vector<ChatMessage>& history,
                                        std::size_t schema_budget) {
  return with_history(query_system_prompt(schema, schema_budget), history,
                      "Task: generate-query\nQuestion: " + question);
}

std::vector<ChatMessage> repair_query(const CandidateQuery& prev,
                                      const std::vector<std::string>& diagnostics,
                                      const schema::GraphSchema& schema,
                                      const std::vector<ChatMessage>& history,
                                      std::size_t schema_budget) {
  std::ostringstream os;
  os << "Task: repair-query\n"
     << "Attempt: " << prev.attempt + 1 << "\n"
     << "Previous query:\n```sparql\n"
     << prev.sparql_text << "\n```\n"
     << "Diagnostics:\n";
  for (const auto& d : diagnostics) os << "- " << d << "\n";
  if (!prev.diagnostics.empty()) {
    os << "Earlier diagnostics:\n";
    for (const auto& d : prev.diagnostics) os << "- " << d << "\n";
  }
  os << "Return a corrected query in a fenced block.";
  return with_history(query_system_prompt(schema, schema_budget), history, os.str());
}

namespace {

const char* const kInterpretSystem =
    "You interpret query results for researchers reviewing a body of literature.\n"
    "Answer with three sections, each starting on its own line: 'Summary:', 'Explanation:' and "
    "'Caveats:' (one '- ' bullet per caveat). Ground every statement in the data shown.";

const char* const kChartSystem =
    "You choose a chart for a result table.\n"
    "Allowed kinds: bar, stacked_bar, line, pie, scatter, table.\n"
    "Reply with one JSON object in a fenced block with the fields kind, x {column, binning}, "
    "y [{column, aggregate}], series, title and sort {column, direction}. Binning is none or decade; "
    "aggregate is none, count, sum, avg, min or max. Use only the columns listed.";

// Whole rows only, never more than `row_cap` of them.
std::string rows_block(const viz::Dataset& data, std::size_t row_cap) {
  viz::Dataset head;
  head.columns = data.columns;
  head.rows.assign(data.rows.begin(),
                   data.rows.begin() + static_cast<std::ptrdiff_t>(std::min(row_cap, data.rows.size())));
  std::string out = data.rows.size() > row_cap
                        ? "Rows: first " + std::to_string(head.rows.size()) + " of " +
                              std::to_string(data.rows.size()) + " rows (CSV)\n"
                        : "Rows: all " + std::to_string(data.rows.size()) + " rows (CSV)\n";
  return out + viz::to_csv(head);
}

}  // namespace

std::vector<ChatMessage> interpret_results(const std::string& question, const viz::Dataset& data,
                                           const viz::ChartSpec& chart, std::size_t row_cap,
                                           bool* sampled) {
  const std::string system = kInterpretSystem;
  std::ostringstream os;
  if (data.rows.empty()) {
    os << "Task: interpret-empty-results\n"
       << "Question: " << question << "\n"
       << "The query returned no rows.\n"
       << "Columns:\n"
       << column_listing(data)
       << "Explain what an empty answer can mean for this question.";
    if (sampled) *sampled = false;
    return {{Role::system, system}, {Role::user, os.str()}};
  }

  if (sampled) *sampled = data.rows.size() > row_cap;
  os << "Task: interpret-results\n"
     << "Question: " << question << "\n"
     << "Chart: " << viz::to_string(chart.kind);
  if (!chart.title.empty()) os << " \"" << chart.title << "\"";
  os << "\nColumns (summaries cover all " << data.rows.size() << " rows):\n" << column_listing(data)
     << rows_block(data, row_cap);
  return {{Role::system, system}, {Role::user, os.str()}};
}

std::vector<ChatMessage> suggest_chart(const std::string& question, const viz::Dataset& data) {
  const std::string system = kChartSystem;
  std::ostringstream os;
  os << "Task: suggest-chart\n"
     << "Question: " << question << "\n"
     << "Rows: " << data.rows.size() << "\n"
     << "Columns:\n"
     << column_listing(data);
  return {{Role::system, system}, {Role::user, os.str()}};
}

std::vector<ChatMessage> refine_query(const std::string& current_query, const std::string& instruction,
                                      const schema::GraphSchema& schema,
                                      const std::vector<ChatMessage>& history, std::size_t schema_budget) {
  std::ostringstream os;
  os << "Task: refine-query\n"
     << "Instruction: " << instruction << "\n"
     << "Current query:\n```sparql\n"
     << current_query << "\n```\n"
     << "Return the revised query in a fenced block.";
  return with_history(query_system_prompt(schema, schema_budget), history, os.str());
}

std::vector<ChatMessage> refine_chart(const std::string& instruction, const viz::ChartSpec& current,
                                      const viz::Dataset& data) {
  std::ostringstream os;
  os << "Task: refine-chart\n"
     << "Instruction: " << instruction << "\n"
     << "Current chart:\n```json\n"
     << viz::to_json(current).dump() << "\n```\n"
     << "Rows: " << data.rows.size() << "\n"
     << "Columns:\n"
     << column_listing(data);
  return {{Role::system, kChartSystem}, {Role::user, os.str()}};
}

std::vector<ChatMessage> refine_interpretation(const std::string& instruction, const Interpretation& current,
                                               const std::string& question, const viz::Dataset& data,
                                               std::size_t row_cap) {
  std::ostringstream os;
  os << "Task: refine-interpretation\n"
     << "Instruction: " << instruction << "\n"
     << "Question: " << question << "\n"
     << "Current interpretation:\n"
     << "Summary: " << current.summary << "\n"
     << "Explanation: " << current.explanation << "\n"
     << "Caveats:\n";
  for (const auto& c : current.caveats) os << "- " << c << "\n";
  os << "Columns:\n" << column_listing(data) << rows_block(data, row_cap);
  return {{Role::system, kInterpretSystem}, {Role::user, os.str()}};
}

}  // namespace prompts

// ---- layer ----

NeuralLayer::NeuralLayer(std::shared_ptr<ProviderRegistry> providers, NeuralOptions options)
    : providers_(std::move(providers)), options_(options) {
  if (!providers_) throw PreconditionError("neural layer needs a provider registry");
  if (options_.max_repair_attempts < 1) throw PreconditionError("max_repair_attempts must be at least 1");
  if (options_.interpretation_row_cap < 1) throw PreconditionError("interpretation row cap must be positive");
}

LlmResponse NeuralLayer::complete(const LlmRequest& req, const std::string& task, ExchangeLog* log) {
  return call(task, req.config, req.messages, log);
}

LlmResponse NeuralLayer::call(const std::string& task, const LlmConfig& cfg,
                              std::vector<ChatMessage> messages, ExchangeLog* log) {
  LlmRequest req{cfg, std::move(messages)};
  LlmExchange ex;
  ex.task = task;
  ex.provider_id = cfg.provider_id;
  ex.model_id = cfg.model_id;
  ex.request_digest = request_digest(req);
  ex.messages = req.messages;
  ex.started_at = now_utc();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto res = providers_->complete(req);
    ex.response = res.content;
    ex.usage = res.usage;
    ex.truncated = res.truncated;
    ex.refusal = res.refusal;
    ex.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    if (log) log->push_back(std::move(ex));
    return res;
  } catch (const std::exception& e) {
    ex.error = e.what();
    ex.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    if (log) log->push_back(std::move(ex));
    throw;
  }
}

CandidateQuery NeuralLayer::generate_query(const std::string& question, const schema::GraphSchema& schema,
                                           const std::vector<ChatMessage>& history, const LlmConfig& cfg,
                                           ExchangeLog* log) {
  if (text::trim(question).empty()) throw PreconditionError("question is empty");
  auto res = call("generate-query", cfg,
                  prompts::generate_query(question, schema, history, options_.schema_budget), log);
  auto block = extract_last_fenced_block(res.content);
  if (!block) throw ExtractionError(1, res.content);
  CandidateQuery out;
  out.sparql_text = std::move(*block);
  out.rationale = strip_fences(res.content);
  out.attempt = 1;
  return out;
}

CandidateQuery NeuralLayer::repair_query(const CandidateQuery& prev, const std::vector<std::string>& diagnostics,
                                         const schema::GraphSchema& schema,
                                         const std::vector<ChatMessage>& history, const LlmConfig& cfg,
                                         ExchangeLog* log) {
  if (diagnostics.empty()) throw PreconditionError("repair requested without diagnostics");
  if (prev.attempt >= options_.max_repair_attempts) {
    auto all = prev.diagnostics;
    all.insert(all.end(), diagnostics.begin(), diagnostics.end());
    throw RepairExhaustedError(prev.attempt, std::move(all));
  }
  auto res = call("repair-query", cfg,
                  prompts::repair_query(prev, diagnostics, schema, history, options_.schema_budget), log);
  CandidateQuery out;
  out.attempt = prev.attempt + 1;
  out.diagnostics = prev.diagnostics;
  out.diagnostics.insert(out.diagnostics.end(), diagnostics.begin(), diagnostics.end());
  auto block = extract_last_fenced_block(res.content);
  if (!block) throw ExtractionError(out.attempt, res.content);
  out.sparql_text = std::move(*block);
  out.rationale = strip_fences(res.content);
  return out;
}

namespace {

// Splits a reply into Summary / Explanation / Caveats sections. Replies
// without section markers become the summary.
Interpretation parse_interpretation(const std::string& content) {
  Interpretation out;
  enum class Section { none, summary, explanation, caveats } current = Section::none;
  std::string summary, explanation;
  bool marked = false;
  for (const auto& raw : text::split(content, '\n')) {
    auto line = text::trim(raw);
    auto lower = text::to_lower(line);
    auto take = [&](std::string_view marker, Section s) {
      if (lower.rfind(marker, 0) != 0) return false;
      current = s;
      marked = true;
      line = text::trim(line.substr(marker.size()));
      return true;
    };
    (void)(take("summary:", Section::summary) || take("explanation:", Section::explanation) ||
        take("caveats:", Section::caveats));
    if (line.empty()) continue;
    switch (current) {
      case Section::summary: summary += (summary.empty() ? "" : " ") + line; break;
      case Section::explanation: explanation += (explanation.empty() ? "" : " ") + line; break;
      case Section::caveats: {
        auto item = line;
        if (item.rfind("- ", 0) == 0 || item.rfind("* ", 0) == 0) item = text::trim(item.substr(2));
        if (!item.empty() && text::to_lower(item) != "none" && text::to_lower(item) != "none.")
          out.caveats.push_back(item);
        break;
      }
      case Section::none: break;
    }
  }
  if (!marked) {
    out.summary = text::trim(content);
  } else {
    out.summary = summary;
    out.explanation = explanation;
  }
  return out;
}

}  // namespace

Interpretation NeuralLayer::interpret_results(const std::string& question, const viz::Dataset& data,
                                              const viz::ChartSpec& chart, const LlmConfig& cfg,
                                              ExchangeLog* log) {
  data.check_invariants();
  bool sampled = false;
  auto messages = prompts::interpret_results(question, data, chart, options_.interpretation_row_cap, &sampled);
  auto res = call(data.rows.empty() ? "interpret-empty-results" : "interpret-results", cfg,
                  std::move(messages), log);
  auto out = parse_interpretation(res.content);
  out.generator = GeneratorKind::llm;
  out.model_id = cfg.model_id;
  if (data.rows.empty()) out.caveats.insert(out.caveats.begin(), "The query returned no rows.");
  if (sampled) {
    out.caveats.push_back("Only the first " + std::to_string(options_.interpretation_row_cap) + " of " +
                          std::to_string(data.rows.size()) +
                          " rows were shown to the model; column summaries cover all rows.");
  }
  if (res.truncated) out.caveats.push_back("The model reply was cut off at the output token limit.");
  if (res.refusal) out.caveats.push_back("The model declined to interpret these results.");
  return out;
}

namespace {

// Errors of one suggestion, empty when it is usable.
std::vector<std::string> chart_problems(const std::string& content, const viz::Dataset& data,
                                        viz::ChartSpec& spec) {
  auto block = extract_last_fenced_block(content);
  auto doc = json::parse(block ? *block : content, nullptr, false);
  if (doc.is_discarded()) return {"reply does not contain a JSON chart object"};
  try {
    spec = viz::chart_from_json(doc);
  } catch (const ValidationError& e) {
    return e.violations();
  }
  return viz::validate_chart(spec, data);
}

}  // namespace

std::vector<std::string> NeuralLayer::chart_round_trip(const std::string& task, std::vector<ChatMessage> messages,
                                                       const viz::Dataset& data, const LlmConfig& cfg,
                                                       ExchangeLog* log, viz::ChartSpec& out) {
  auto res = call(task, cfg, messages, log);
  auto problems = chart_problems(res.content, data, out);
  if (problems.empty()) return problems;

  messages.push_back({Role::assistant, res.content});
  std::string fix = "Task: repair-chart\nThe suggested chart is invalid:\n";
  for (const auto& p : problems) fix += "- " + p + "\n";
  fix += "Return a corrected JSON object in a fenced block.";
  messages.push_back({Role::user, std::move(fix)});
  res = call("repair-chart", cfg, std::move(messages), log);
  return chart_problems(res.content, data, out);
}

viz::ChartSpec NeuralLayer::suggest_chart(const std::string& question, const viz::Dataset& data,
                                          const LlmConfig& cfg, ExchangeLog* log,
                                          std::vector<std::string>* notes) {
  auto note = [&](std::string s) {
    if (notes) notes->push_back(std::move(s));
  };
  if (data.columns.size() < 2) return viz::default_chart(data, question);

  try {
    viz::ChartSpec spec;
    auto problems = chart_round_trip("suggest-chart", prompts::suggest_chart(question, data), data, cfg, log, spec);
    if (problems.empty()) return spec;
    note("chart suggestion rejected after one repair round: " + text::join(problems, "; "));
  } catch (const Error& e) {
    note(std::string("chart suggestion failed: ") + e.what());
  }
  return viz::default_chart(data, question);
}

CandidateQuery NeuralLayer::refine_query(const std::string& current_query, const std::string& instruction,
                                         const schema::GraphSchema& schema,
                                         const std::vector<ChatMessage>& history, const LlmConfig& cfg,
                                         ExchangeLog* log) {
  if (text::trim(instruction).empty()) throw PreconditionError("refinement instruction is empty");
  auto res = call("refine-query", cfg,
                  prompts::refine_query(current_query, instruction, schema, history, options_.schema_budget),
                  log);
  auto block = extract_last_fenced_block(res.content);
  if (!block) throw ExtractionError(1, res.content);
  CandidateQuery out;
  out.sparql_text = std::move(*block);
  out.rationale = strip_fences(res.content);
  return out;
}

viz::ChartSpec NeuralLayer::refine_chart(const std::string& instruction, const viz::ChartSpec& current,
                                         const viz::Dataset& data, const LlmConfig& cfg, ExchangeLog* log) {
  if (text::trim(instruction).empty()) throw PreconditionError("refinement instruction is empty");
  viz::ChartSpec spec;
  auto problems =
      chart_round_trip("refine-chart", prompts::refine_chart(instruction, current, data), data, cfg, log, spec);
  if (!problems.empty()) throw ValidationError("refined chart is not valid for the data", std::move(problems));
  return spec;
}

Interpretation NeuralLayer::refine_interpretation(const std::string& instruction, const Interpretation& current,
                                                  const std::string& question, const viz::Dataset& data,
                                                  const LlmConfig& cfg, ExchangeLog* log) {
  if (text::trim(instruction).empty()) throw PreconditionError("refinement instruction is empty");
  auto res = call("refine-interpretation", cfg,
                  prompts::refine_interpretation(instruction, current, question, data,
                                                 options_.interpretation_row_cap),
                  log);
  auto out = parse_interpretation(res.content);
  out.generator = GeneratorKind::llm;
  out.model_id = cfg.model_id;
  if (data.rows.size() > options_.interpretation_row_cap) {
    out.caveats.push_back("Only the first " + std::to_string(options_.interpretation_row_cap) + " of " +
                          std::to_string(data.rows.size()) +
                          " rows were shown to the model; column summaries cover all rows.");
  }
  return out;
}

}  // namespace compass::neural
