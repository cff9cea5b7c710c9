#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "evac/geometry.hpp"
#include "evac/random.hpp"
#include "evac/scenario.hpp"

namespace evac {

struct FireConfig {
  double spread_interval{2.0};  ///< seconds between spread steps, > 0
  std::uint64_t seed{0};
};

/// Burning cells grow by one von Neumann ring per spread interval and never
/// shrink. Walls and void never burn.
struct FireState {
  CellSet burning;
  int ignition_room{-1};
  CellPos ignition_cell{};
  double ignited_at{0.0};
  int spread_count{0};
  std::vector<CellPos> front;  ///< cells added by the most recent step (ignition cell initially)

  friend bool operator==(const FireState&, const FireState&) = default;
};

class FireConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Draws an ignitable room uniformly, then a cell of it uniformly.
FireState ignite(const ScenarioSpec& spec, const FireConfig& config, Rng& rng, double now = 0.0);

/// Ignition at a chosen cell; used for scripted scenarios and tests.
FireState ignite_at(const ScenarioSpec& spec, CellPos cell, double now = 0.0);

/// Applies every spread step due by `now`: floor((now - ignited_at) / interval).
FireState fire_step(FireState state, const ScenarioSpec& spec, const FireConfig& config, double now);

/// Cells that burned during the steps applied since `before_count`.
std::vector<CellPos> cells_added_since(const FireState& before, const FireState& after);

bool is_passable(const ScenarioSpec& spec, const FireState& state, CellPos cell);

}  // namespace evac
