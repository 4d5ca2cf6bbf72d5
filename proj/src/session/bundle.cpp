#include "compass/session/bundle.hpp"

#include "compass/common/digest.hpp"
#include "compass/common/ids.hpp"

namespace compass::session {

using nlohmann::json;

namespace {

// Bundle member -> outcome member, for the parts carried over verbatim.
const std::pair<const char*, const char*> kCarried[] = {
    {"schema_fingerprint", "schema_fingerprint"},
    {"llm_config_redacted", "llm_config"},
    {"query_text", "query_text"},
    {"query_history", "query_history"},
    {"result", "result"},
    {"dataset", "dataset"},
    {"chart", "chart"},
    {"interpretation", "interpretation"},
    {"trace", "steps"},
    {"status", "status"},
    {"failure", "failure"},
};

const char* const kRequired[] = {"bundle_version", "use_case_id", "question", "trace", "status", "content_digest"};

}  // namespace

std::string bundle_digest(const json& bundle) {
  json copy = bundle;
  copy.erase("content_digest");
  return json_digest(copy);
}

json make_bundle(const pipeline::QuestionOutcome& outcome, const std::vector<std::string>& secrets) {
  const auto doc = pipeline::to_json(outcome);
  json bundle = {{"bundle_version", kBundleVersion},
                 {"use_case_id", outcome.question.use_case_id},
                 {"question", doc["question"]}};
  bundle["question"].erase("use_case_id");
  for (const auto& [to, from] : kCarried) bundle[to] = doc[from];

  json transcript = json::array();
  for (const auto& e : pipeline::prompt_transcript(outcome)) transcript.push_back(neural::to_json(e));
  bundle["prompt_transcript"] = std::move(transcript);
  if (outcome.chart && outcome.dataset) {
    bundle["chart_document"] = viz::chart_document(*outcome.chart, *outcome.dataset);
  } else {
    bundle["chart_document"] = nullptr;
  }
  bundle["created_at"] = format_timestamp(now_utc());

  if (!neural::find_secrets(bundle.dump(), secrets).empty()) throw SecretLeakError();
  bundle["content_digest"] = bundle_digest(bundle);
  return bundle;
}

json export_bundle(const SessionStore& store, const std::string& session_id, const std::string& outcome_id,
                   const std::vector<std::string>& secrets) {
  auto outcome = store.find_outcome(session_id, outcome_id);
  if (!outcome) throw NotFoundError("outcome '" + outcome_id + "' not found in session '" + session_id + "'");
  return make_bundle(*outcome, secrets);
}

json verify_bundle(std::string_view text) {
  auto bundle = json::parse(text, nullptr, false);
  if (bundle.is_discarded() || !bundle.is_object()) throw IntegrityError("bundle is not a JSON object");
  for (const char* key : kRequired)
    if (!bundle.contains(key)) throw IntegrityError(std::string("bundle is missing '") + key + "'");
  if (!bundle["content_digest"].is_string() || bundle["content_digest"].get<std::string>() != bundle_digest(bundle))
    throw IntegrityError("content_digest does not match bundle content");
  if (!bundle["bundle_version"].is_number_integer()) throw IntegrityError("bundle_version is not an integer");
  const int version = bundle["bundle_version"].get<int>();
  if (version != kBundleVersion) throw BundleVersionError(version);
  return bundle;
}

pipeline::QuestionOutcome outcome_from_bundle(const json& bundle) {
  json doc = json::object();
  doc["question"] = bundle.at("question");
  doc["question"]["use_case_id"] = bundle.at("use_case_id");
  for (const auto& [from, to] : kCarried) doc[to] = bundle.contains(from) ? bundle[from] : json(nullptr);
  if (!doc["query_text"].is_string()) doc["query_text"] = "";
  if (!doc["query_history"].is_array()) doc["query_history"] = json::array();
  try {
    auto o = pipeline::outcome_from_json(doc);
    o.imported = true;
    return o;
  } catch (const Error& e) {
    throw IntegrityError(std::string("bundle content is malformed: ") + e.what());
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("bundle content is malformed: ") + e.what());
  }
}

ImportResult import_bundle(SessionStore& store, const schema::SchemaRegistry& schemas, std::string_view text,
                           const std::string& owner) {
  const auto bundle = verify_bundle(text);
  auto outcome = outcome_from_bundle(bundle);
  const auto schema = schemas.find(outcome.question.use_case_id);
  if (!schema) throw NotFoundError("use case '" + outcome.question.use_case_id + "' is not registered");

  ImportResult r;
  if (schema->fingerprint != outcome.schema_fingerprint) {
    r.warnings.push_back("schema fingerprint differs: bundle was made against " + outcome.schema_fingerprint +
                         ", registered schema is " + schema->fingerprint);
  }

  r.session_id = store.create_session(owner);
  outcome.session_id = r.session_id;
  outcome.outcome_id = random_id();
  r.outcome_id = outcome.outcome_id;

  json question = bundle["question"];
  question["use_case_id"] = outcome.question.use_case_id;
  question["imported"] = true;
  store.append_event(r.session_id, EventKind::question_submitted, question);
  for (const auto& w : r.warnings) store.append_event(r.session_id, EventKind::note, {{"level", "warning"}, {"text", w}});
  for (const auto& e : pipeline::prompt_transcript(outcome))
    store.append_event(r.session_id, EventKind::llm_exchange, neural::to_json(e));
  store.append_event(r.session_id, EventKind::outcome, pipeline::to_json(outcome));
  return r;
}

json normalized_bundle(const json& bundle) {
  json doc = bundle;
  doc.erase("created_at");
  doc.erase("content_digest");
  auto strip_calls = [](json& calls) {
    if (!calls.is_array()) return;
    for (auto& c : calls) {
      c.erase("started_at");
      c.erase("latency_ms");
    }
  };
  if (doc["trace"].is_array()) {
    for (auto& s : doc["trace"]) {
      s.erase("started");
      s.erase("finished");
      strip_calls(s["llm_calls"]);
    }
  }
  strip_calls(doc["prompt_transcript"]);
  if (doc["dataset"].is_object()) doc["dataset"]["provenance"].erase("retrieved_at");
  if (doc["chart_document"].is_object() && doc["chart_document"].contains("provenance"))
    doc["chart_document"]["provenance"].erase("retrieved_at");
  return doc;
}

}  // namespace compass::session
