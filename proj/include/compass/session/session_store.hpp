#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "compass/common/time.hpp"
#include "compass/neural/llm.hpp"
#include "compass/pipeline/outcome.hpp"

namespace compass::session {

enum class EventKind { question_submitted, outcome, refinement, llm_exchange, note };

std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view name);

struct InteractionEvent {
  std::string event_id;
  Timestamp timestamp{};
  EventKind kind = EventKind::note;
  nlohmann::json payload;
  bool retained = true;

  bool operator==(const InteractionEvent&) const = default;
};

nlohmann::json to_json(const InteractionEvent& e);

struct SessionInfo {
  std::string session_id;
  std::string owner;
  Timestamp created_at{};

  bool operator==(const SessionInfo&) const = default;
};

// A view over a session prefix: retained events up to and including the
// chosen event.
struct SessionState {
  std::string session_id;
  std::string up_to_event_id;  // empty for a session with no events
  std::vector<InteractionEvent> events;
  std::vector<pipeline::QuestionOutcome> outcomes;
  std::vector<neural::ChatMessage> context;  // LLM context assembled from retained exchanges and notes
};

// Durable record stream. Records are JSON objects appended in order.
class StorageBackend {
 public:
  virtual ~StorageBackend() = default;
  virtual std::vector<nlohmann::json> load() = 0;
  // Returns only once the record is durable.
  virtual void append(const nlohmann::json& record) = 0;
};

class MemoryBackend : public StorageBackend {
 public:
  std::vector<nlohmann::json> load() override;
  void append(const nlohmann::json& record) override;

 private:
  std::mutex mutex_;
  std::vector<nlohmann::json> records_;
};

// JSON lines, one record per line, fsync after every append. A torn last
// line from a crash is ignored on load.
class FileBackend : public StorageBackend {
 public:
  explicit FileBackend(std::string path);
  ~FileBackend() override;
  std::vector<nlohmann::json> load() override;
  void append(const nlohmann::json& record) override;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mutex_;
  int fd_ = -1;
};

class SessionStore {
 public:
  // Replays every record of the backend.
  explicit SessionStore(std::shared_ptr<StorageBackend> backend);

  std::string create_session(const std::string& owner);
  void delete_session(const std::string& session_id);
  bool has_session(const std::string& session_id) const;
  SessionInfo info(const std::string& session_id) const;
  std::vector<SessionInfo> sessions() const;

  // Throws NotFoundError for unknown or deleted sessions.
  std::string append_event(const std::string& session_id, EventKind kind, nlohmann::json payload);
  void set_retained(const std::string& session_id, const std::string& event_id, bool retained);

  // Full history, retained or not.
  std::vector<InteractionEvent> events(const std::string& session_id) const;
  InteractionEvent event(const std::string& session_id, const std::string& event_id) const;

  SessionState restore(const std::string& session_id, const std::string& up_to_event_id) const;
  SessionState current(const std::string& session_id) const;

  // Outcome lookup over the full history.
  std::optional<pipeline::QuestionOutcome> find_outcome(const std::string& session_id,
                                                        const std::string& outcome_id) const;
  std::vector<pipeline::QuestionOutcome> outcomes(const std::string& session_id) const;
  // Outcomes of every session, for statistics.
  std::vector<pipeline::QuestionOutcome> all_outcomes() const;

  // Serializes pipeline runs within one session.
  std::shared_ptr<std::mutex> run_lock(const std::string& session_id);

  // Whole store as JSON, for equality checks.
  nlohmann::json snapshot() const;

 private:
  struct SessionData {
    SessionInfo info;
    std::vector<InteractionEvent> events;
    std::map<std::string, std::size_t> index;  // event id -> position
    std::uint64_t next_seq = 1;
  };

  void apply(const nlohmann::json& record);
  const SessionData& data(const std::string& session_id) const;
  SessionData& data(const std::string& session_id);
  SessionState view(const SessionData& s, std::size_t end) const;

  std::shared_ptr<StorageBackend> backend_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, SessionData> sessions_;
  std::mutex locks_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> run_locks_;
};

}  // namespace compass::session
