#include "evac/fire.hpp"

#include <cmath>

namespace evac {

FireState ignite(const ScenarioSpec& spec, const FireConfig& config, Rng& rng, double now) {
  if (!(config.spread_interval > 0.0)) throw FireConfigError("spread_interval must be positive");
  std::vector<int> candidates;
  for (std::size_t i = 0; i < spec.rooms.size(); ++i) {
    if (spec.rooms[i].ignitable && !spec.rooms[i].cells.empty()) candidates.push_back(static_cast<int>(i));
  }
  if (candidates.empty()) throw FireConfigError("fire cannot ignite: no ignitable room");

  const int room = candidates[uniform_index(rng, candidates.size())];
  const auto& cells = spec.rooms[static_cast<std::size_t>(room)].cells;
  const CellPos cell = cells[uniform_index(rng, cells.size())];
  auto state = ignite_at(spec, cell, now);
  state.ignition_room = room;
  return state;
}

FireState ignite_at(const ScenarioSpec& spec, CellPos cell, double now) {
  if (!spec.grid.passable(cell)) throw FireConfigError("ignition cell must be passable");
  FireState state;
  state.burning = CellSet(spec.grid.rows(), spec.grid.cols());
  state.burning.insert(cell);
  state.ignition_room = spec.grid.at(cell).room;
  state.ignition_cell = cell;
  state.ignited_at = now;
  state.front = {cell};
  return state;
}

FireState fire_step(FireState state, const ScenarioSpec& spec, const FireConfig& config, double now) {
  if (!(config.spread_interval > 0.0)) throw FireConfigError("spread_interval must be positive");
  if (now < state.ignited_at) return state;
  // The small epsilon keeps accumulated tick clocks (0.1 * 20 = 1.9999...) on schedule.
  const auto due = static_cast<int>(std::floor((now - state.ignited_at) / config.spread_interval + 1e-9));
  while (state.spread_count < due) {
    // Cells burning before the previous step already had their neighbours
    // ignited, so only the last front can spread.
    std::vector<CellPos> next;
    for (const auto& p : state.front) {
      for (Direction d : kDirectionOrder) {
        const auto q = step(p, d);
        if (spec.grid.passable(q) && state.burning.insert(q)) next.push_back(q);
      }
    }
    state.front = std::move(next);
    ++state.spread_count;
    if (state.front.empty()) {
      // Fully burned out; remaining steps are no-ops.
      state.spread_count = due;
    }
  }
  return state;
}

std::vector<CellPos> cells_added_since(const FireState& before, const FireState& after) {
  std::vector<CellPos> out;
  for (const auto& p : after.burning.cells()) {
    if (!before.burning.contains(p)) out.push_back(p);
  }
  return out;
}

bool is_passable(const ScenarioSpec& spec, const FireState& state, CellPos cell) {
  return spec.grid.passable(cell) && !state.burning.contains(cell);
}

}  // namespace evac
