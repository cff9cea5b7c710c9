#include "evac/agents.hpp"

#include <algorithm>
#include <stdexcept>

namespace evac {

namespace {

// Tolerance for comparing accumulated progress against the step cost.
constexpr double kProgressEps = 1e-9;

bool burning(const FireState* fire, CellPos p) { return fire != nullptr && fire->burning.contains(p); }

const CellSet& blocked_set(const FireState* fire) {
  static const CellSet empty;
  return fire != nullptr ? fire->burning : empty;
}

std::optional<Route> retrace_route(const AgentState& agent, const ScenarioSpec& spec, const FireState* fire) {
  const auto& entry = spec.entry_route;
  const auto it = std::find(entry.rbegin(), entry.rend(), agent.cell);
  if (it != entry.rend()) {
    // Walk the entry route backwards from the agent's position.
    std::vector<CellPos> cells(it, entry.rend());
    const bool clear = std::none_of(cells.begin() + 1, cells.end(), [&](CellPos p) { return burning(fire, p); });
    if (clear) return make_route(spec, std::move(cells));
  }
  const auto head = entry.front();
  if (spec.grid.passable(head)) {
    if (auto r = shortest_path(spec, agent.cell, head, blocked_set(fire))) return r;
  }
  return std::nullopt;
}

}  // namespace

void check(const AgentProfile& profile) {
  if (!(profile.speed > 0.0)) throw std::invalid_argument("agent speed must be positive");
  if (!(profile.stair_factor > 0.0 && profile.stair_factor <= 1.0)) {
    throw std::invalid_argument("stair_factor must be in (0, 1]");
  }
}

void check(const BehaviorParams& params) {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(params.p_nearest_given_familiar) || !in_unit(params.p_retrace_given_unfamiliar)) {
    throw std::invalid_argument("behavior probabilities must be in [0, 1]");
  }
}

std::string_view to_string(Intent i) { return i == Intent::NearestExit ? "nearest_exit" : "retrace_entry"; }

std::string_view to_string(AgentStatus s) {
  switch (s) {
    case AgentStatus::Idle: return "idle";
    case AgentStatus::Evacuating: return "evacuating";
    case AgentStatus::Escaped: return "escaped";
    case AgentStatus::Trapped: return "trapped";
  }
  return "?";
}

Intent choose_intent(const AgentProfile& profile, const BehaviorParams& params, Rng& rng) {
  if (profile.familiar) {
    return bernoulli(rng, params.p_nearest_given_familiar) ? Intent::NearestExit : Intent::RetraceEntry;
  }
  return bernoulli(rng, params.p_retrace_given_unfamiliar) ? Intent::RetraceEntry : Intent::NearestExit;
}

std::optional<Route> plan_route(const AgentState& agent, const ScenarioSpec& spec, const FireState* fire) {
  if (agent.intent == Intent::RetraceEntry && !spec.entry_route.empty()) {
    if (auto r = retrace_route(agent, spec, fire)) return r;
  }
  if (auto e = nearest_exit(spec, agent.cell, blocked_set(fire))) return std::move(e->route);
  return std::nullopt;
}

AgentState start_evacuating(AgentState agent, const ScenarioSpec& spec, const FireState* fire) {
  auto route = plan_route(agent, spec, fire);
  if (!route) {
    agent.status = AgentStatus::Trapped;
    agent.route = {};
    agent.route_pos = 0;
    return agent;
  }
  const auto old_next = agent.next_cell();
  agent.route = std::move(*route);
  agent.route_pos = 0;
  if (agent.next_cell() != old_next) agent.progress = 0.0;
  agent.status = AgentStatus::Evacuating;
  return agent;
}

AgentState replan_if_blocked(AgentState agent, const ScenarioSpec& spec, const FireState* fire) {
  if (agent.status != AgentStatus::Evacuating || fire == nullptr) return agent;
  const auto& cells = agent.route.cells;
  const bool blocked = std::any_of(cells.begin() + static_cast<std::ptrdiff_t>(std::min(agent.route_pos + 1, cells.size())),
                                   cells.end(), [&](CellPos p) { return fire->burning.contains(p); });
  if (!blocked) return agent;
  agent.intent = Intent::NearestExit;
  return start_evacuating(std::move(agent), spec, fire);
}

AgentState agent_tick(AgentState agent, World& world, double dt) {
  if (agent.status != AgentStatus::Evacuating) return agent;
  if (!(dt > 0.0)) throw std::invalid_argument("agent_tick: dt must be positive");
  const auto& spec = world.spec;
  const double step_cost = spec.cell_size;

  // Arrived at a route end that is not an exit (retrace head elsewhere).
  if (!agent.next_cell()) {
    agent.intent = Intent::NearestExit;
    agent = start_evacuating(std::move(agent), spec, world.fire);
    if (agent.status != AgentStatus::Evacuating || !agent.next_cell()) return agent;
  }

  const auto first = *agent.next_cell();
  const double factor = spec.grid.at(first).kind == CellKind::Stair ? agent.profile.stair_factor : 1.0;
  agent.progress += agent.profile.speed * factor * dt;
  agent.waiting = false;

  while (true) {
    const auto next_opt = agent.next_cell();
    if (!next_opt || agent.progress + kProgressEps < step_cost) break;
    const auto next = *next_opt;
    if (burning(world.fire, next)) {
      agent.progress = step_cost;
      agent.waiting = true;
      break;
    }
    const auto occupant = world.occupancy.at(next);
    if (occupant != Occupancy::kFree) {
      auto* peers = world.peers;
      const bool peer_agent = peers != nullptr && occupant >= 0 && static_cast<std::size_t>(occupant) < peers->size();
      if (peer_agent) {
        auto& peer = (*peers)[static_cast<std::size_t>(occupant)];
        const bool head_on = peer.status == AgentStatus::Evacuating && peer.waiting &&
                             peer.progress + kProgressEps >= step_cost && peer.next_cell() == agent.cell &&
                             !burning(world.fire, agent.cell);
        if (head_on) {
          const auto here = agent.cell;
          peer.cell = here;
          peer.route_pos += 1;
          peer.progress = std::max(0.0, peer.progress - step_cost);
          peer.waiting = false;
          agent.cell = next;
          agent.route_pos += 1;
          agent.progress -= step_cost;
          world.occupancy.place(here, peer.id);
          world.occupancy.place(next, agent.id);
          if (world.moves != nullptr) {
            world.moves->push_back({agent.id, here, next});
            world.moves->push_back({peer.id, next, here});
          }
          continue;
        }
      }
      agent.progress = step_cost;
      agent.waiting = true;
      break;
    }

    world.occupancy.clear(agent.cell);
    if (world.moves != nullptr) world.moves->push_back({agent.id, agent.cell, next});
    agent.cell = next;
    agent.route_pos += 1;
    agent.progress -= step_cost;
    if (spec.grid.at(next).kind == CellKind::Exit) {
      agent.status = AgentStatus::Escaped;
      agent.escape_time = world.now;
      const auto* exit = spec.exit_at(next);
      agent.exit_id = exit != nullptr ? exit->id : std::string{};
      agent.progress = 0.0;
      break;
    }
    world.occupancy.place(next, agent.id);
  }
  if (agent.progress < 0.0) agent.progress = 0.0;
  return agent;
}

double traverse_time(const ScenarioSpec& spec, const Route& route, const AgentProfile& profile, double dt) {
  check(profile);
  if (!(dt > 0.0)) throw std::invalid_argument("traverse_time: dt must be positive");
  if (route.cells.size() <= 1) return 0.0;
  AgentState agent;
  agent.profile = profile;
  agent.cell = route.cells.front();
  agent.route = route;
  agent.status = AgentStatus::Evacuating;
  Occupancy occupancy(spec.grid.rows(), spec.grid.cols());
  occupancy.place(agent.cell, agent.id);

  const auto target = route.cells.back();
  // Generous cap: ten times the nominal time at the slowest step speed.
  const double slowest = profile.speed * profile.stair_factor;
  const auto cap = static_cast<long>(10.0 * route.length / slowest / dt) + 100;
  long ticks = 0;
  while (agent.cell != target && ticks < cap) {
    ++ticks;
    World world{spec, nullptr, occupancy, static_cast<double>(ticks) * dt};
    agent = agent_tick(std::move(agent), world, dt);
  }
  if (agent.cell != target) throw std::runtime_error("traverse_time: agent did not reach the route end");
  return static_cast<double>(ticks) * dt;
}

}  // namespace evac
