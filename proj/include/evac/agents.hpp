#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evac/fire.hpp"
#include "evac/geometry.hpp"
#include "evac/random.hpp"
#include "evac/scenario.hpp"

namespace evac {

struct AgentProfile {
  double speed{1.5};  ///< m/s, adult profile
  bool familiar{false};
  bool gamer{false};  ///< recorded only, no behavioral effect
  double stair_factor{1.0};  ///< speed multiplier on steps entering stair cells, in (0, 1]

  friend bool operator==(const AgentProfile&, const AgentProfile&) = default;
};

/// Exit-choice probabilities; defaults are the observed proportions
/// familiar 11/13 nearest and unfamiliar 11/17 retracing.
struct BehaviorParams {
  double p_nearest_given_familiar{11.0 / 13.0};
  double p_retrace_given_unfamiliar{11.0 / 17.0};

  friend bool operator==(const BehaviorParams&, const BehaviorParams&) = default;
};

void check(const AgentProfile& profile);
void check(const BehaviorParams& params);

enum class Intent : std::uint8_t { NearestExit, RetraceEntry };
enum class AgentStatus : std::uint8_t { Idle, Evacuating, Escaped, Trapped };

std::string_view to_string(Intent i);
std::string_view to_string(AgentStatus s);

struct AgentState {
  std::uint32_t id{0};
  AgentProfile profile;
  CellPos cell;
  double progress{0.0};  ///< metres towards the next route cell
  Intent intent{Intent::NearestExit};
  Route route;
  std::size_t route_pos{0};  ///< index of `cell` within route.cells
  AgentStatus status{AgentStatus::Idle};
  std::optional<double> escape_time;
  std::string exit_id;  ///< exit used, set on escape
  bool waiting{false};  ///< blocked by an occupant during the last tick

  std::optional<CellPos> next_cell() const {
    if (route_pos + 1 < route.cells.size()) return route.cells[route_pos + 1];
    return std::nullopt;
  }

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

/// Single-occupancy register: one agent (or the player) per cell.
class Occupancy {
 public:
  static constexpr std::int64_t kFree = -1;

  Occupancy() = default;
  Occupancy(int rows, int cols)
      : cols_(cols), slots_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), kFree) {}

  std::int64_t at(CellPos p) const { return slots_[index(p)]; }
  bool occupied(CellPos p) const { return at(p) != kFree; }
  void place(CellPos p, std::int64_t who) { slots_[index(p)] = who; }
  void clear(CellPos p) { slots_[index(p)] = kFree; }

 private:
  std::size_t index(CellPos p) const {
    return static_cast<std::size_t>(p.row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(p.col);
  }

  int cols_{0};
  std::vector<std::int64_t> slots_;
};

struct MoveEvent {
  std::uint32_t agent;
  CellPos from;
  CellPos to;
};

/// Everything agent_tick reads or writes besides the agent itself.
struct World {
  const ScenarioSpec& spec;
  const FireState* fire;  ///< null before ignition
  Occupancy& occupancy;
  double now;  ///< clock at the end of the current tick
  std::vector<AgentState>* peers{nullptr};  ///< agents indexed by id, enables head-on swaps
  std::vector<MoveEvent>* moves{nullptr};
};

Intent choose_intent(const AgentProfile& profile, const BehaviorParams& params, Rng& rng);

/// Route for the agent's intent from its current cell, avoiding burning
/// cells. Absent when no exit is reachable.
std::optional<Route> plan_route(const AgentState& agent, const ScenarioSpec& spec, const FireState* fire);

/// Plans, assigns the route and switches to Evacuating, or Trapped when no
/// route exists.
AgentState start_evacuating(AgentState agent, const ScenarioSpec& spec, const FireState* fire);

/// Advances along the route at profile speed; waits when the next cell is
/// occupied and swaps with a peer blocked head-on. Reaching an exit cell
/// escapes the agent and frees its cell.
AgentState agent_tick(AgentState agent, World& world, double dt);

/// Replans with nearest-exit intent when any remaining route cell burns.
AgentState replan_if_blocked(AgentState agent, const ScenarioSpec& spec, const FireState* fire);

/// Time to walk a route with no congestion and no fire, stepping `dt`.
double traverse_time(const ScenarioSpec& spec, const Route& route, const AgentProfile& profile, double dt);

}  // namespace evac
