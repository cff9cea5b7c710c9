#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evac/geometry.hpp"

namespace evac {

enum class CellKind : std::uint8_t { Floor, Wall, Door, Stair, Exit, Void };

constexpr bool is_passable_kind(CellKind k) {
  return k == CellKind::Floor || k == CellKind::Door || k == CellKind::Stair || k == CellKind::Exit;
}

struct Cell {
  CellKind kind{CellKind::Void};
  int room{-1};  ///< index into ScenarioSpec::rooms, -1 when outside any room
  bool spawn{false};

  friend bool operator==(const Cell&, const Cell&) = default;
};

class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols) : rows_(rows), cols_(cols), cells_(static_cast<std::size_t>(rows * cols)) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return cells_.empty(); }
  bool in_bounds(CellPos p) const { return p.row >= 0 && p.col >= 0 && p.row < rows_ && p.col < cols_; }

  const Cell& at(CellPos p) const { return cells_[index(p)]; }
  Cell& at(CellPos p) { return cells_[index(p)]; }

  bool passable(CellPos p) const { return in_bounds(p) && is_passable_kind(at(p).kind); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(CellPos p) const { return static_cast<std::size_t>(p.row * cols_ + p.col); }

  int rows_{0};
  int cols_{0};
  std::vector<Cell> cells_;
};

struct Room {
  std::string id;
  std::vector<CellPos> cells;  ///< row-major
  bool ignitable{false};
  friend bool operator==(const Room&, const Room&) = default;
};

enum class ExitKind : std::uint8_t { Main, Emergency };

struct Exit {
  std::string id;
  std::vector<CellPos> cells;
  ExitKind kind{ExitKind::Main};
  friend bool operator==(const Exit&, const Exit&) = default;
};

struct Sign {
  CellPos cell;
  std::string points_to;
  friend bool operator==(const Sign&, const Sign&) = default;
};

struct PathDefinition {
  std::string id;
  CellPos from;
  CellPos to;
  double declared_length{0.0};
  std::optional<double> real_time;
  friend bool operator==(const PathDefinition&, const PathDefinition&) = default;
};

/// Immutable building description. Construct through parse_scenario().
struct ScenarioSpec {
  std::string name;
  double cell_size{0.5};
  double spread_interval{2.0};
  Grid grid;
  std::vector<Room> rooms;
  std::vector<Exit> exits;
  std::vector<Sign> signs;
  std::vector<CellPos> spawns;       ///< every `@` cell, row-major
  std::vector<CellPos> entry_route;  ///< building entrance first, default spawn last
  std::vector<PathDefinition> calibration_paths;

  /// Last entry_route cell when present, otherwise the first spawn.
  std::optional<CellPos> default_spawn() const;

  /// Spawns with the default first, then the rest in row-major order.
  std::vector<CellPos> spawn_order() const;

  const Exit* find_exit(std::string_view id) const;
  const Exit* exit_at(CellPos p) const;
  const PathDefinition* find_path(std::string_view id) const;

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

struct Route {
  std::vector<CellPos> cells;
  double length{0.0};  ///< metres, steps x cell_size
  int stair_steps{0};

  std::size_t steps() const { return cells.empty() ? 0 : cells.size() - 1; }
  friend bool operator==(const Route&, const Route&) = default;
};

Route make_route(const ScenarioSpec& spec, std::vector<CellPos> cells);

// --- parsing -------------------------------------------------------------

class ScenarioSyntaxError : public std::runtime_error {
 public:
  ScenarioSyntaxError(int line, int column, const std::string& what);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

enum class Severity : std::uint8_t { Error, Warning };

struct Finding {
  Severity severity{Severity::Error};
  std::string code;
  std::string message;
  std::optional<CellPos> location;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const { return findings.empty(); }
  bool has_errors() const;
};

class ScenarioSemanticError : public std::runtime_error {
 public:
  explicit ScenarioSemanticError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// Syntax-level parse only; the result may violate semantic invariants.
ScenarioSpec parse_scenario_unchecked(std::string_view document);

/// Parses and validates. Throws ScenarioSyntaxError or ScenarioSemanticError
/// (the latter only for error-severity findings).
ScenarioSpec parse_scenario(std::string_view document);

ScenarioSpec load_scenario_file(const std::string& path);

/// Canonical text form; parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const ScenarioSpec& spec);

ValidationReport validate(const ScenarioSpec& spec);

std::string to_string(const Finding& f);

// --- queries -------------------------------------------------------------

/// Minimum-step 4-connected route avoiding impassable and blocked cells.
/// Exit cells are terminal: only the final cell may be an exit. Among equal
/// length routes the one whose direction sequence is lexicographically
/// smallest in (up, left, down, right) order is returned. Throws
/// std::invalid_argument when an endpoint is out of bounds or impassable.
std::optional<Route> shortest_path(const ScenarioSpec& spec, CellPos from, CellPos to,
                                   const CellSet& blocked = {});

struct ExitRoute {
  std::string exit_id;
  Route route;
};

/// Exit with the shortest reachable route from `from`; ties go to the
/// lexicographically smaller exit id.
std::optional<ExitRoute> nearest_exit(const ScenarioSpec& spec, CellPos from, const CellSet& blocked = {});

/// BFS step distances from `origin` honouring terminal exits; -1 = unreachable.
std::vector<int> distance_field(const ScenarioSpec& spec, CellPos origin, const CellSet& blocked);

std::string_view to_string(CellKind k);
std::string_view to_string(ExitKind k);

}  // namespace evac
