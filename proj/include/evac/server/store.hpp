#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evac/events.hpp"
#include "evac/harness.hpp"
#include "evac/scenario.hpp"

namespace evac::server {

/// Scenarios addressable by name.
class ScenarioCatalog {
 public:
  /// Loads every *.scn file in `dir`; invalid files are skipped and returned as errors.
  std::vector<std::string> load_directory(const std::filesystem::path& dir);
  void add(std::string document);

  std::shared_ptr<const ScenarioSpec> find(const std::string& id) const;
  const std::string* document(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  struct Entry {
    std::shared_ptr<const ScenarioSpec> spec;
    std::string document;
  };
  std::map<std::string, Entry> entries_;
};

struct SessionSummary {
  std::string session_id;
  std::string scenario;
  bool familiar{false};
  bool gamer{false};
  std::string outcome;  ///< escaped | trapped
  std::optional<double> score;
  std::string exit;          ///< exit used, empty unless escaped
  std::string nearest_exit;  ///< nearest exit from the spawn at the alarm
  std::uint64_t seed{0};
  std::string started_at;  ///< UTC, ISO 8601
  std::string event_digest;

  bool nearest_chosen() const { return !exit.empty() && exit == nearest_exit; }

  friend bool operator==(const SessionSummary&, const SessionSummary&) = default;
};

nlohmann::json to_json(const SessionSummary& s);
SessionSummary summary_from_json(const nlohmann::json& j);

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One directory per session holding summary.json and events.log. Appends
/// from concurrent sessions are serialized internally.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  void persist(const SessionSummary& summary, const EventLog& log);

  std::optional<SessionSummary> load_summary(const std::string& session_id) const;
  std::optional<std::string> load_log(const std::string& session_id) const;
  std::vector<SessionSummary> list() const;

  /// Familiarity x nearest-exit-chosen over stored sessions; trapped
  /// sessions count in the "other" column.
  ContingencyTable aggregate() const;

 private:
  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

bool valid_session_id(const std::string& id);

}  // namespace evac::server
