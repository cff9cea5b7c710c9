#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evac/agents.hpp"
#include "evac/events.hpp"
#include "evac/fire.hpp"
#include "evac/scenario.hpp"

namespace evac {

struct SessionConfig {
  double tick_dt{0.1};
  std::uint64_t seed{0};
  bool fire_enabled{true};
  std::optional<double> spread_interval;  ///< overrides the scenario's value
  BehaviorParams behavior;
  AgentProfile agent_profile;  ///< speed and stair_factor for AI agents
  double time_cap{600.0};      ///< headless runs stop here and report truncation
  bool logging{true};          ///< off for bulk experiments
};

/// Occupants per (familiar, gamer) category.
struct PopulationSpec {
  int familiar_gamers{0};
  int familiar_nongamers{0};
  int unfamiliar_gamers{0};
  int unfamiliar_nongamers{0};

  int familiar() const { return familiar_gamers + familiar_nongamers; }
  int unfamiliar() const { return unfamiliar_gamers + unfamiliar_nongamers; }
  int total() const { return familiar() + unfamiliar(); }

  /// The 30-subject sample: 8 / 6 familiar and 5 / 11 unfamiliar (gamer / non-gamer).
  static constexpr PopulationSpec subject_sample() { return {8, 6, 5, 11}; }

  friend bool operator==(const PopulationSpec&, const PopulationSpec&) = default;
};

enum class Mode : std::uint8_t { Interactive, Headless };

enum class Outcome : std::uint8_t { Running, Escaped, Trapped, Finished };

std::string_view to_string(Mode m);
std::string_view to_string(Outcome o);

/// Player inputs. Key names follow the classic W/A/S/D + space + O layout.
struct Input {
  enum class Kind : std::uint8_t { Move, Jump, StartFire };
  Kind kind{Kind::Jump};
  Direction direction{Direction::Up};

  static Input move(Direction d) { return {Kind::Move, d}; }
  static Input jump() { return {Kind::Jump, Direction::Up}; }
  static Input start_fire() { return {Kind::StartFire, Direction::Up}; }

  friend bool operator==(const Input&, const Input&) = default;
};

/// "W" "A" "S" "D" "space" "O".
std::string_view key_name(const Input& in);
std::optional<Input> input_from_key(std::string_view key);

class SessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-agent choice bookkeeping captured at the alarm.
struct AgentChoice {
  std::string nearest_exit;  ///< nearest exit at alarm time
  std::string initial_exit;  ///< exit targeted by the first plan
};

/// One evacuation run. Owned and mutated by a single executor.
class Session {
 public:
  static constexpr std::int64_t kPlayerOccupant = std::int64_t{1} << 40;

  Session(std::shared_ptr<const ScenarioSpec> spec, SessionConfig config, Mode mode, PopulationSpec population,
          std::optional<AgentProfile> player = std::nullopt);

  void apply_input(const Input& input);
  void tick();

  /// Ends a headless session (all agents terminal or time cap reached).
  void finish(bool truncated);

  /// Alarm-relative escape time; throws SessionError unless escaped.
  double score() const;

  const ScenarioSpec& spec() const { return *spec_; }
  std::shared_ptr<const ScenarioSpec> spec_ptr() const { return spec_; }
  const SessionConfig& config() const { return config_; }
  Mode mode() const { return mode_; }
  const PopulationSpec& population() const { return population_; }

  std::uint64_t tick_count() const { return tick_count_; }
  double clock() const { return clock_; }
  bool alarm_started() const { return alarm_started_; }
  double timer_origin() const { return timer_origin_; }
  /// Timer reading: 0 before the alarm.
  double elapsed() const { return alarm_started_ ? clock_ - timer_origin_ : 0.0; }

  const FireState* fire() const { return fire_ ? &*fire_ : nullptr; }
  const std::vector<AgentState>& agents() const { return agents_; }
  const std::vector<AgentChoice>& choices() const { return choices_; }
  const AgentState* player() const { return player_ ? &*player_ : nullptr; }
  std::optional<Direction> player_heading() const { return heading_; }
  const std::string& player_exit() const { return player_exit_; }
  const std::string& player_nearest_exit() const { return player_nearest_exit_; }
  const EventLog& log() const { return log_; }
  Outcome outcome() const { return outcome_; }
  bool running() const { return outcome_ == Outcome::Running; }
  bool truncated() const { return truncated_; }

  /// Every AI agent escaped or trapped.
  bool all_agents_done() const;

 private:
  void trigger_alarm();
  void update_player(bool fire_changed);
  void end(Outcome outcome);
  void record(EventKind kind, nlohmann::json payload = nlohmann::json::object());

  std::shared_ptr<const ScenarioSpec> spec_;
  SessionConfig config_;
  FireConfig fire_config_;
  Mode mode_;
  PopulationSpec population_;
  Rng rng_;
  Rng fire_rng_;

  std::uint64_t tick_count_{0};
  double clock_{0.0};
  bool alarm_started_{false};
  double timer_origin_{0.0};
  std::optional<double> escape_clock_;
  std::optional<FireState> fire_;
  std::vector<AgentState> agents_;
  std::vector<AgentChoice> choices_;
  std::optional<AgentState> player_;
  std::optional<Direction> heading_;
  std::string player_exit_;
  std::string player_nearest_exit_;
  Occupancy occupancy_;
  EventLog log_;
  Outcome outcome_{Outcome::Running};
  bool truncated_{false};
};

nlohmann::json cell_json(CellPos p);

}  // namespace evac
