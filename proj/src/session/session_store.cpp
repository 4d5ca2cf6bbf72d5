#include "compass/session/session_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <spdlog/spdlog.h>

#include "compass/common/ids.hpp"

namespace compass::session {

using nlohmann::json;

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::question_submitted: return "question-submitted";
    case EventKind::outcome: return "outcome";
    case EventKind::refinement: return "refinement";
    case EventKind::llm_exchange: return "llm-exchange";
    case EventKind::note: return "note";
  }
  return "note";
}

EventKind event_kind_from_string(std::string_view name) {
  for (auto k : {EventKind::question_submitted, EventKind::outcome, EventKind::refinement, EventKind::llm_exchange,
                 EventKind::note})
    if (to_string(k) == name) return k;
  throw Error("invalid_value", "unknown event kind '" + std::string(name) + "'");
}

json to_json(const InteractionEvent& e) {
  return {{"event_id", e.event_id},
          {"timestamp", format_timestamp(e.timestamp)},
          {"kind", to_string(e.kind)},
          {"payload", e.payload},
          {"retained", e.retained}};
}

namespace {

InteractionEvent event_from_json(const json& doc) {
  InteractionEvent e;
  e.event_id = doc.at("event_id").get<std::string>();
  e.timestamp = parse_timestamp(doc.at("timestamp").get<std::string>());
  e.kind = event_kind_from_string(doc.at("kind").get<std::string>());
  e.payload = doc.at("payload");
  e.retained = doc.value("retained", true);
  return e;
}

std::string event_id_for(std::uint64_t seq) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "evt-%06llu", static_cast<unsigned long long>(seq));
  return buf;
}

std::uint64_t seq_of(const std::string& event_id) {
  if (event_id.rfind("evt-", 0) != 0) return 0;
  return std::strtoull(event_id.c_str() + 4, nullptr, 10);
}

}  // namespace

// ---- backends ----

std::vector<json> MemoryBackend::load() {
  std::lock_guard lock(mutex_);
  return records_;
}

void MemoryBackend::append(const json& record) {
  std::lock_guard lock(mutex_);
  records_.push_back(record);
}

FileBackend::FileBackend(std::string path) : path_(std::move(path)) {
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error("storage_error", "cannot open session log " + path_ + ": " + std::strerror(errno));
}

FileBackend::~FileBackend() {
  if (fd_ >= 0) ::close(fd_);
}

std::vector<json> FileBackend::load() {
  std::lock_guard lock(mutex_);
  std::ifstream in(path_);
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> bad_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (bad_line) {
      throw Error("storage_error", "session log " + path_ + " is corrupt at line " + std::to_string(*bad_line));
    }
    auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      bad_line = line_no;
      continue;
    }
    out.push_back(std::move(doc));
  }
  if (bad_line) spdlog::warn("ignoring torn record at line {} of {}", *bad_line, path_);
  return out;
}

void FileBackend::append(const json& record) {
  std::lock_guard lock(mutex_);
  const std::string line = record.dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    auto n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("storage_error", "write to " + path_ + " failed: " + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) throw Error("storage_error", "fsync of " + path_ + " failed: " + std::strerror(errno));
}

// ---- store ----

SessionStore::SessionStore(std::shared_ptr<StorageBackend> backend) : backend_(std::move(backend)) {
  if (!backend_) throw PreconditionError("session store needs a storage backend");
  for (const auto& record : backend_->load()) apply(record);
}

void SessionStore::apply(const json& record) {
  const auto op = record.at("op").get<std::string>();
  const auto sid = record.at("session_id").get<std::string>();
  if (op == "create_session") {
    SessionData s;
    s.info = {sid, record.value("owner", std::string{}), parse_timestamp(record.at("created_at").get<std::string>())};
    sessions_[sid] = std::move(s);
    return;
  }
  auto it = sessions_.find(sid);
  if (it == sessions_.end()) throw Error("storage_error", "record for unknown session " + sid);
  auto& s = it->second;
  if (op == "event") {
    auto e = event_from_json(record.at("event"));
    s.index[e.event_id] = s.events.size();
    s.next_seq = std::max(s.next_seq, seq_of(e.event_id) + 1);
    s.events.push_back(std::move(e));
  } else if (op == "retain") {
    auto pos = s.index.find(record.at("event_id").get<std::string>());
    if (pos == s.index.end()) throw Error("storage_error", "retain record for unknown event");
    s.events[pos->second].retained = record.at("retained").get<bool>();
  } else if (op == "delete_session") {
    sessions_.erase(it);
  } else {
    throw Error("storage_error", "unknown record op '" + op + "'");
  }
}

const SessionStore::SessionData& SessionStore::data(const std::string& session_id) const {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFoundError("session '" + session_id + "' not found");
  return it->second;
}

SessionStore::SessionData& SessionStore::data(const std::string& session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFoundError("session '" + session_id + "' not found");
  return it->second;
}

std::string SessionStore::create_session(const std::string& owner) {
  std::unique_lock lock(mutex_);
  std::string sid;
  do {
    sid = random_id();
  } while (sessions_.count(sid));
  json record = {{"op", "create_session"}, {"session_id", sid}, {"owner", owner},
                 {"created_at", format_timestamp(now_utc())}};
  backend_->append(record);
  apply(record);
  return sid;
}

void SessionStore::delete_session(const std::string& session_id) {
  std::unique_lock lock(mutex_);
  data(session_id);
  json record = {{"op", "delete_session"}, {"session_id", session_id}};
  backend_->append(record);
  apply(record);
}

bool SessionStore::has_session(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  return sessions_.count(session_id) > 0;
}

SessionInfo SessionStore::info(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  return data(session_id).info;
}

std::vector<SessionInfo> SessionStore::sessions() const {
  std::shared_lock lock(mutex_);
  std::vector<SessionInfo> out;
  for (const auto& [_, s] : sessions_) out.push_back(s.info);
  return out;
}

std::string SessionStore::append_event(const std::string& session_id, EventKind kind, json payload) {
  std::unique_lock lock(mutex_);
  auto& s = data(session_id);
  InteractionEvent e;
  e.event_id = event_id_for(s.next_seq);
  e.timestamp = now_utc();
  e.kind = kind;
  e.payload = std::move(payload);
  json record = {{"op", "event"}, {"session_id", session_id}, {"event", to_json(e)}};
  backend_->append(record);
  apply(record);
  return e.event_id;
}

void SessionStore::set_retained(const std::string& session_id, const std::string& event_id, bool retained) {
  std::unique_lock lock(mutex_);
  auto& s = data(session_id);
  if (!s.index.count(event_id))
    throw NotFoundError("event '" + event_id + "' not found in session '" + session_id + "'");
  json record = {{"op", "retain"}, {"session_id", session_id}, {"event_id", event_id}, {"retained", retained}};
  backend_->append(record);
  apply(record);
}

std::vector<InteractionEvent> SessionStore::events(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  return data(session_id).events;
}

InteractionEvent SessionStore::event(const std::string& session_id, const std::string& event_id) const {
  std::shared_lock lock(mutex_);
  const auto& s = data(session_id);
  auto it = s.index.find(event_id);
  if (it == s.index.end()) throw NotFoundError("event '" + event_id + "' not found in session '" + session_id + "'");
  return s.events[it->second];
}

SessionState SessionStore::view(const SessionData& s, std::size_t end) const {
  SessionState st;
  st.session_id = s.info.session_id;
  if (end > 0) st.up_to_event_id = s.events[end - 1].event_id;
  for (std::size_t i = 0; i < end; ++i) {
    const auto& e = s.events[i];
    if (!e.retained) continue;
    st.events.push_back(e);
    if (e.kind == EventKind::outcome) {
      st.outcomes.push_back(pipeline::outcome_from_json(e.payload));
    } else if (e.kind == EventKind::llm_exchange) {
      auto ex = neural::exchange_from_json(e.payload);
      if (!ex.error.empty()) continue;
      for (auto m = ex.messages.rbegin(); m != ex.messages.rend(); ++m) {
        if (m->role == neural::Role::user) {
          st.context.push_back(*m);
          break;
        }
      }
      st.context.push_back({neural::Role::assistant, ex.response});
    }
  }
  return st;
}

SessionState SessionStore::restore(const std::string& session_id, const std::string& up_to_event_id) const {
  std::shared_lock lock(mutex_);
  const auto& s = data(session_id);
  auto it = s.index.find(up_to_event_id);
  if (it == s.index.end())
    throw NotFoundError("event '" + up_to_event_id + "' not found in session '" + session_id + "'");
  return view(s, it->second + 1);
}

SessionState SessionStore::current(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  const auto& s = data(session_id);
  return view(s, s.events.size());
}

std::optional<pipeline::QuestionOutcome> SessionStore::find_outcome(const std::string& session_id,
                                                                    const std::string& outcome_id) const {
  std::shared_lock lock(mutex_);
  for (const auto& e : data(session_id).events) {
    if (e.kind == EventKind::outcome && e.payload.value("outcome_id", std::string{}) == outcome_id)
      return pipeline::outcome_from_json(e.payload);
  }
  return std::nullopt;
}

std::vector<pipeline::QuestionOutcome> SessionStore::outcomes(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  std::vector<pipeline::QuestionOutcome> out;
  for (const auto& e : data(session_id).events)
    if (e.kind == EventKind::outcome) out.push_back(pipeline::outcome_from_json(e.payload));
  return out;
}

std::vector<pipeline::QuestionOutcome> SessionStore::all_outcomes() const {
  std::shared_lock lock(mutex_);
  std::vector<pipeline::QuestionOutcome> out;
  for (const auto& [_, s] : sessions_)
    for (const auto& e : s.events)
      if (e.kind == EventKind::outcome) out.push_back(pipeline::outcome_from_json(e.payload));
  return out;
}

std::shared_ptr<std::mutex> SessionStore::run_lock(const std::string& session_id) {
  std::lock_guard lock(locks_mutex_);
  auto& m = run_locks_[session_id];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

json SessionStore::snapshot() const {
  std::shared_lock lock(mutex_);
  json out = json::object();
  for (const auto& [sid, s] : sessions_) {
    json events = json::array();
    for (const auto& e : s.events) events.push_back(to_json(e));
    out[sid] = {{"owner", s.info.owner}, {"created_at", format_timestamp(s.info.created_at)}, {"events", events}};
  }
  return out;
}

}  // namespace compass::session
