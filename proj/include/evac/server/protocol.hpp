#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evac/server/store.hpp"
#include "evac/session.hpp"

namespace evac::server {

struct HostConfig {
  SessionConfig session;
  PopulationSpec population{PopulationSpec::subject_sample()};
  std::uint32_t state_stride{1};      ///< one state message every N ticks
  std::size_t outbox_capacity{256};   ///< state messages are dropped first beyond this
};

/// Supplies session ids, seeds and wall-clock timestamps; replaced in tests.
struct HostEnvironment {
  std::function<std::string()> new_session_id;
  std::function<std::uint64_t()> new_seed;
  std::function<std::string()> now_utc;
  std::function<void(const std::string&)> operator_log;

  static HostEnvironment system();
};

nlohmann::json scenario_snapshot(const ScenarioSpec& spec);
nlohmann::json state_message(const Session& session);
nlohmann::json error_message(std::string_view code, std::string_view detail);

/// Protocol state for one client connection. Not thread-safe: the transport
/// calls it from a single strand.
class SessionHost {
 public:
  SessionHost(const ScenarioCatalog& catalog, SessionStore* store, HostConfig config, HostEnvironment env);

  /// Handles one client text frame. Inputs are queued and applied at the
  /// next tick boundary.
  void on_message(std::string_view text);

  /// Advances the session one tick when one is running.
  void on_tick();

  /// True while the transport should keep its tick timer armed.
  bool ticking() const { return session_ && session_->running(); }
  bool closed() const { return closed_; }

  std::optional<std::string> pop_outgoing();
  std::size_t outgoing_size() const { return outbox_.size(); }

  const Session* session() const { return session_.get(); }
  const std::string& session_id() const { return session_id_; }
  std::uint64_t dropped_inputs() const { return dropped_inputs_; }
  std::uint64_t dropped_states() const { return dropped_states_; }
  bool persisted() const { return persisted_; }

 private:
  void handle_join(const nlohmann::json& msg);
  void handle_input(const nlohmann::json& msg);
  void handle_leave();
  void finish_if_ended();
  void send(nlohmann::json msg, bool droppable = false);

  struct Outgoing {
    std::string text;
    bool droppable;
  };

  const ScenarioCatalog& catalog_;
  SessionStore* store_;
  HostConfig config_;
  HostEnvironment env_;

  std::unique_ptr<Session> session_;
  std::string session_id_;
  std::string started_at_;
  std::deque<Input> pending_;
  std::optional<std::int64_t> last_seq_;
  std::deque<Outgoing> outbox_;
  std::uint64_t dropped_inputs_{0};
  std::uint64_t dropped_states_{0};
  bool ended_sent_{false};
  bool persisted_{false};
  bool closed_{false};
};

}  // namespace evac::server
