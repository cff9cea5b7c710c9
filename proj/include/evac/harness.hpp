#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evac/session.hpp"

namespace evac {

// --- headless runs ---------------------------------------------------------

/// Input applied once the session has completed `tick` ticks.
struct ScriptedInput {
  std::uint64_t tick{0};
  Input input;
};

struct HeadlessOptions {
  std::optional<AgentProfile> player;
  std::vector<ScriptedInput> inputs;  ///< sorted by tick
};

enum class AgentOutcomeKind : std::uint8_t { Escaped, Trapped, Truncated };
std::string_view to_string(AgentOutcomeKind k);

struct AgentOutcome {
  std::uint32_t id{0};
  bool familiar{false};
  bool gamer{false};
  Intent intent{Intent::NearestExit};
  AgentOutcomeKind outcome{AgentOutcomeKind::Truncated};
  std::string exit;           ///< exit used, empty unless escaped
  std::optional<double> escape_time;  ///< alarm-relative seconds
  std::string initial_exit;   ///< exit of the first plan at the alarm
  std::string nearest_exit;   ///< nearest exit at the alarm
};

struct SessionResult {
  std::vector<AgentOutcome> agents;
  Outcome outcome{Outcome::Running};
  std::optional<double> player_score;
  bool truncated{false};
  std::uint64_t ticks{0};
  EventLog log;
  std::string digest;  ///< digest_hex(log.serialize())
};

/// Drives a session until it ends: scripted inputs at their ticks, then ticks
/// until every agent (and the player, if any) is terminal or the time cap.
void drive_to_end(Session& session, const std::vector<ScriptedInput>& inputs);

SessionResult summarize(const Session& session);

/// Auto-alarm at t = 0; bit-identical results for identical config.seed.
SessionResult run_headless(std::shared_ptr<const ScenarioSpec> spec, const SessionConfig& config,
                           const PopulationSpec& population, const HeadlessOptions& options = {});

// --- replay ------------------------------------------------------------------

struct ReplayResult {
  Outcome outcome{Outcome::Running};
  std::optional<double> score;
  std::optional<double> recorded_score;
  std::string digest;
  std::string recorded_digest;
  bool identical{false};  ///< regenerated log bytes equal the recorded ones
};

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rebuilds the session from its session_start record, re-applies the logged
/// inputs at their ticks and compares the regenerated log.
ReplayResult replay_log(const EventLog& recorded);

// --- calibration -----------------------------------------------------------

/// Relative deviation of simulated from measured time: 1 - game / real.
/// Throws std::domain_error for non-positive real_time.
double calibration_error(double game_time, double real_time);

struct CalibrationRecord {
  std::string path_id;
  double distance{0.0};   ///< declared (measured) length, metres
  double real_time{0.0};  ///< stopwatch seconds
  double game_time{std::numeric_limits<double>::quiet_NaN()};
  double error{std::numeric_limits<double>::quiet_NaN()};
  std::string status{"ok"};  ///< ok | disconnected | no_real_time

  double subject_speed() const { return distance / real_time; }
  bool ok() const { return status == "ok"; }
};

/// Single-agent traversal of each path (no fire, no congestion).
std::vector<CalibrationRecord> calibration_report(const ScenarioSpec& spec, const std::vector<PathDefinition>& paths,
                                                  const AgentProfile& profile, double tick_dt = 0.1);

void write_calibration_csv(std::ostream& os, const std::vector<CalibrationRecord>& records);

// --- experiment ------------------------------------------------------------

/// Rows familiar / unfamiliar, columns nearest exit chosen / other.
struct ContingencyTable {
  std::array<std::array<long, 2>, 2> counts{};

  static constexpr std::size_t kFamiliar = 0;
  static constexpr std::size_t kUnfamiliar = 1;
  static constexpr std::size_t kNearest = 0;
  static constexpr std::size_t kOther = 1;

  long row_total(std::size_t row) const { return counts[row][kNearest] + counts[row][kOther]; }
  double nearest_fraction(std::size_t row) const;

  friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;
};

struct EscapeStats {
  long agents{0};
  long escaped{0};
  long trapped{0};
  long truncated{0};
  double sum{0.0};
  double min{std::numeric_limits<double>::infinity()};
  double max{-std::numeric_limits<double>::infinity()};

  void add(const AgentOutcome& o);
  double mean() const { return escaped > 0 ? sum / static_cast<double>(escaped) : 0.0; }
};

struct ExperimentReport {
  ContingencyTable table;
  /// Indexed familiar_gamers, familiar_nongamers, unfamiliar_gamers, unfamiliar_nongamers.
  std::array<EscapeStats, 4> categories;
  long trials{0};
};

std::size_t category_index(bool familiar, bool gamer);

/// Tallies one session's agents into the table: the nearest-exit column
/// counts agents whose initial route targeted the nearest exit.
void tally(ExperimentReport& report, const std::vector<AgentOutcome>& agents);

/// Runs `trials` headless sessions with seeds derived from `seed`.
ExperimentReport run_experiment(std::shared_ptr<const ScenarioSpec> spec, SessionConfig config,
                                const PopulationSpec& population, long trials, std::uint64_t seed);

std::uint64_t trial_seed(std::uint64_t master, long trial);

void write_experiment_csv(std::ostream& os, const ExperimentReport& report);
void write_run_csv(std::ostream& os, const SessionResult& result);

}  // namespace evac
