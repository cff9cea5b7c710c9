#include "evac/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace evac {

namespace {

// Splits on `sep`, keeping empty pieces.
std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  // Prefer the shortest representation that reads back exactly.
  for (int p = 1; p <= 17; ++p) {
    std::ostringstream trial;
    trial.precision(p);
    trial << v;
    if (std::stod(trial.str()) == v) return trial.str();
  }
  return os.str();
}

std::string format_cell(CellPos p) { return std::to_string(p.row) + "," + std::to_string(p.col); }

// Compresses a connected cell sequence into straight runs.
std::string format_cell_list(const std::vector<CellPos>& cells) {
  std::string out;
  std::size_t i = 0;
  while (i < cells.size()) {
    std::size_t j = i;
    if (i + 1 < cells.size() && adjacent(cells[i], cells[i + 1])) {
      const auto dir = direction_between(cells[i], cells[i + 1]);
      j = i + 1;
      while (j + 1 < cells.size() && direction_between(cells[j], cells[j + 1]) == dir) ++j;
    }
    if (!out.empty()) out += ';';
    out += format_cell(cells[i]);
    if (j > i) out += "-" + format_cell(cells[j]);
    // Next item starts after the run end; the run end is not repeated.
    i = j + 1;
  }
  return out;
}

class LineParser {
 public:
  LineParser(int line, std::string_view text) : line_(line), text_(text) {}

  [[noreturn]] void fail(std::string_view at, const std::string& what) const {
    const auto col = at.data() >= text_.data() && at.data() <= text_.data() + text_.size()
                         ? static_cast<int>(at.data() - text_.data()) + 1
                         : 1;
    throw ScenarioSyntaxError(line_, col, what);
  }

  int parse_int(std::string_view tok) const {
    int v = 0;
    const auto* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc{} || ptr != end || tok.empty()) fail(tok, "expected integer, got '" + std::string(tok) + "'");
    return v;
  }

  double parse_double(std::string_view tok) const {
    if (tok.empty()) fail(tok, "expected number");
    std::string s(tok);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      fail(tok, "expected number, got '" + s + "'");
    }
    if (used != s.size()) fail(tok, "expected number, got '" + s + "'");
    return v;
  }

  bool parse_bool(std::string_view tok) const {
    if (tok == "true") return true;
    if (tok == "false") return false;
    fail(tok, "expected true or false, got '" + std::string(tok) + "'");
  }

  CellPos parse_cell(std::string_view tok) const {
    const auto parts = split(tok, ',');
    if (parts.size() != 2) fail(tok, "expected cell as row,col");
    return {parse_int(parts[0]), parse_int(parts[1])};
  }

  std::vector<CellPos> parse_cell_list(std::string_view tok) const {
    std::vector<CellPos> out;
    for (auto item : split(tok, ';')) {
      if (item.empty()) fail(item, "empty cell list item");
      const auto dash = item.find('-');
      if (dash == std::string_view::npos) {
        out.push_back(parse_cell(item));
        continue;
      }
      const auto a = parse_cell(item.substr(0, dash));
      const auto b = parse_cell(item.substr(dash + 1));
      if (a.row != b.row && a.col != b.col) fail(item, "cell run must be horizontal or vertical");
      const int dr = b.row > a.row ? 1 : (b.row < a.row ? -1 : 0);
      const int dc = b.col > a.col ? 1 : (b.col < a.col ? -1 : 0);
      for (CellPos p = a;; p = {p.row + dr, p.col + dc}) {
        out.push_back(p);
        if (p == b) break;
      }
    }
    return out;
  }

  std::vector<int> parse_int_list(std::string_view tok, std::size_t n) const {
    const auto parts = split(tok, ',');
    if (parts.size() != n) fail(tok, "expected " + std::to_string(n) + " comma-separated integers");
    std::vector<int> out;
    for (auto p : parts) out.push_back(parse_int(p));
    return out;
  }

  /// Splits the directive arguments into positional words and key=value pairs.
  void tokenize(std::string_view rest, std::vector<std::string_view>& words,
                std::map<std::string_view, std::string_view>& kv) const {
    std::size_t i = 0;
    while (i < rest.size()) {
      while (i < rest.size() && (rest[i] == ' ' || rest[i] == '\t')) ++i;
      if (i >= rest.size()) break;
      std::size_t j = i;
      while (j < rest.size() && rest[j] != ' ' && rest[j] != '\t' && rest[j] != '\r') ++j;
      const auto tok = rest.substr(i, j - i);
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos) {
        words.push_back(tok);
      } else {
        const auto key = tok.substr(0, eq);
        if (kv.contains(key)) fail(tok, "duplicate key '" + std::string(key) + "'");
        kv[key] = tok.substr(eq + 1);
      }
      i = j;
    }
  }

 private:
  int line_;
  std::string_view text_;
};

void require_keys(const LineParser& lp, std::string_view line, const std::map<std::string_view, std::string_view>& kv,
                  std::initializer_list<std::string_view> required, std::initializer_list<std::string_view> optional) {
  for (auto k : required) {
    if (!kv.contains(k)) lp.fail(line, "missing key '" + std::string(k) + "'");
  }
  for (const auto& [k, v] : kv) {
    const bool known = std::find(required.begin(), required.end(), k) != required.end() ||
                       std::find(optional.begin(), optional.end(), k) != optional.end();
    if (!known) lp.fail(k, "unknown key '" + std::string(k) + "'");
  }
}

CellKind kind_from_char(char ch, bool& spawn, bool& ok) {
  spawn = false;
  ok = true;
  switch (ch) {
    case '.': return CellKind::Floor;
    case '#': return CellKind::Wall;
    case 'D': return CellKind::Door;
    case 'S': return CellKind::Stair;
    case 'E': return CellKind::Exit;
    case '@': spawn = true; return CellKind::Floor;
    case ' ': return CellKind::Void;
    default: ok = false; return CellKind::Void;
  }
}

char char_from_cell(const Cell& c) {
  switch (c.kind) {
    case CellKind::Floor: return c.spawn ? '@' : '.';
    case CellKind::Wall: return '#';
    case CellKind::Door: return 'D';
    case CellKind::Stair: return 'S';
    case CellKind::Exit: return 'E';
    case CellKind::Void: return ' ';
  }
  return ' ';
}

bool valid_identifier(std::string_view id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) != 0 || ch == '_' || ch == '-' || ch == '.';
  });
}

}  // namespace

ScenarioSyntaxError::ScenarioSyntaxError(int line, int column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

ScenarioSemanticError::ScenarioSemanticError(ValidationReport report)
    : std::runtime_error([&] {
        std::string msg = "invalid scenario";
        for (const auto& f : report.findings) {
          if (f.severity == Severity::Error) msg += "; " + to_string(f);
        }
        return msg;
      }()),
      report_(std::move(report)) {}

bool ValidationReport::has_errors() const {
  return std::any_of(findings.begin(), findings.end(), [](const Finding& f) { return f.severity == Severity::Error; });
}

std::optional<CellPos> ScenarioSpec::default_spawn() const {
  if (!entry_route.empty()) return entry_route.back();
  if (!spawns.empty()) return spawns.front();
  return std::nullopt;
}

std::vector<CellPos> ScenarioSpec::spawn_order() const {
  std::vector<CellPos> out;
  const auto def = default_spawn();
  if (def && grid.in_bounds(*def) && grid.at(*def).spawn) out.push_back(*def);
  for (const auto& s : spawns) {
    if (!def || s != *def) out.push_back(s);
  }
  return out;
}

const Exit* ScenarioSpec::find_exit(std::string_view id) const {
  for (const auto& e : exits) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

const Exit* ScenarioSpec::exit_at(CellPos p) const {
  for (const auto& e : exits) {
    if (std::find(e.cells.begin(), e.cells.end(), p) != e.cells.end()) return &e;
  }
  return nullptr;
}

const PathDefinition* ScenarioSpec::find_path(std::string_view id) const {
  for (const auto& p : calibration_paths) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

Route make_route(const ScenarioSpec& spec, std::vector<CellPos> cells) {
  Route r;
  r.cells = std::move(cells);
  r.length = static_cast<double>(r.steps()) * spec.cell_size;
  for (std::size_t i = 1; i < r.cells.size(); ++i) {
    if (spec.grid.in_bounds(r.cells[i]) && spec.grid.at(r.cells[i]).kind == CellKind::Stair) ++r.stair_steps;
  }
  return r;
}

ScenarioSpec parse_scenario_unchecked(std::string_view document) {
  ScenarioSpec spec;
  bool have_name = false;
  bool have_cell_size = false;
  bool have_grid = false;
  bool in_grid = false;
  bool have_entry_route = false;
  std::vector<std::string> grid_rows;
  int grid_first_line = 0;

  struct PendingRoom {
    std::string id;
    bool ignitable;
    std::vector<int> rect;
    int line;
  };
  std::vector<PendingRoom> pending_rooms;

  const auto lines = split(document, '\n');
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int line_no = static_cast<int>(li) + 1;
    std::string_view raw = lines[li];
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    LineParser lp(line_no, raw);

    if (in_grid) {
      if (!raw.empty() && raw.front() == '|') {
        if (raw.size() < 2 || raw.back() != '|') lp.fail(raw.substr(raw.size() - 1), "grid row must end with '|'");
        grid_rows.emplace_back(raw.substr(1, raw.size() - 2));
        continue;
      }
      in_grid = false;
    }

    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    const auto colon = line.find(':');
    const auto first_space = line.find_first_of(" \t");
    if (colon != std::string_view::npos && (first_space == std::string_view::npos || colon < first_space)) {
      const auto key = line.substr(0, colon);
      const auto value = trim(line.substr(colon + 1));
      if (key == "name") {
        if (have_name) lp.fail(key, "duplicate header 'name'");
        if (!valid_identifier(value)) lp.fail(value, "invalid scenario name");
        spec.name = std::string(value);
        have_name = true;
      } else if (key == "cell_size") {
        if (have_cell_size) lp.fail(key, "duplicate header 'cell_size'");
        spec.cell_size = lp.parse_double(value);
        if (!(spec.cell_size > 0.0)) lp.fail(value, "cell_size must be positive");
        have_cell_size = true;
      } else if (key == "spread_interval") {
        spec.spread_interval = lp.parse_double(value);
        if (!(spec.spread_interval > 0.0)) lp.fail(value, "spread_interval must be positive");
      } else if (key == "grid") {
        if (have_grid) lp.fail(key, "duplicate grid block");
        if (!value.empty()) lp.fail(value, "unexpected text after 'grid:'");
        have_grid = true;
        in_grid = true;
        grid_first_line = line_no + 1;
      } else {
        lp.fail(key, "unknown header '" + std::string(key) + "'");
      }
      continue;
    }

    const auto directive = line.substr(0, first_space == std::string_view::npos ? line.size() : first_space);
    const auto rest = first_space == std::string_view::npos ? std::string_view{} : line.substr(first_space);
    std::vector<std::string_view> words;
    std::map<std::string_view, std::string_view> kv;
    lp.tokenize(rest, words, kv);

    if (directive == "room") {
      if (words.size() != 1) lp.fail(line, "room needs exactly one id");
      if (!valid_identifier(words[0])) lp.fail(words[0], "invalid room id");
      require_keys(lp, line, kv, {"rect"}, {"ignitable"});
      PendingRoom room{std::string(words[0]), kv.contains("ignitable") ? lp.parse_bool(kv["ignitable"]) : false,
                       lp.parse_int_list(kv["rect"], 4), line_no};
      pending_rooms.push_back(std::move(room));
    } else if (directive == "exit") {
      if (words.size() != 1) lp.fail(line, "exit needs exactly one id");
      if (!valid_identifier(words[0])) lp.fail(words[0], "invalid exit id");
      require_keys(lp, line, kv, {"cells"}, {"kind"});
      Exit e;
      e.id = std::string(words[0]);
      e.cells = lp.parse_cell_list(kv["cells"]);
      if (kv.contains("kind")) {
        if (kv["kind"] == "main") {
          e.kind = ExitKind::Main;
        } else if (kv["kind"] == "emergency") {
          e.kind = ExitKind::Emergency;
        } else {
          lp.fail(kv["kind"], "exit kind must be main or emergency");
        }
      }
      spec.exits.push_back(std::move(e));
    } else if (directive == "sign") {
      if (!words.empty()) lp.fail(words[0], "unexpected word in sign directive");
      require_keys(lp, line, kv, {"at", "to"}, {});
      spec.signs.push_back({lp.parse_cell(kv["at"]), std::string(kv["to"])});
    } else if (directive == "entry_route") {
      if (have_entry_route) lp.fail(directive, "duplicate entry_route");
      if (!words.empty()) lp.fail(words[0], "unexpected word in entry_route directive");
      require_keys(lp, line, kv, {"cells"}, {});
      spec.entry_route = lp.parse_cell_list(kv["cells"]);
      have_entry_route = true;
    } else if (directive == "path") {
      if (words.size() != 1) lp.fail(line, "path needs exactly one id");
      if (!valid_identifier(words[0])) lp.fail(words[0], "invalid path id");
      require_keys(lp, line, kv, {"from", "to", "length"}, {"real_time"});
      PathDefinition p;
      p.id = std::string(words[0]);
      p.from = lp.parse_cell(kv["from"]);
      p.to = lp.parse_cell(kv["to"]);
      p.declared_length = lp.parse_double(kv["length"]);
      if (!(p.declared_length > 0.0)) lp.fail(kv["length"], "path length must be positive");
      if (kv.contains("real_time")) {
        p.real_time = lp.parse_double(kv["real_time"]);
        if (!(*p.real_time > 0.0)) lp.fail(kv["real_time"], "real_time must be positive");
      }
      spec.calibration_paths.push_back(std::move(p));
    } else {
      lp.fail(directive, "unknown directive '" + std::string(directive) + "'");
    }
  }

  if (!have_name) throw ScenarioSyntaxError(1, 1, "missing header 'name'");
  if (!have_cell_size) throw ScenarioSyntaxError(1, 1, "missing header 'cell_size'");
  if (!have_grid || grid_rows.empty()) throw ScenarioSyntaxError(grid_first_line > 0 ? grid_first_line : 1, 1, "missing or empty grid block");

  const int rows = static_cast<int>(grid_rows.size());
  const int cols = static_cast<int>(grid_rows.front().size());
  if (cols == 0) throw ScenarioSyntaxError(grid_first_line, 2, "grid rows must not be empty");
  spec.grid = Grid(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = grid_rows[static_cast<std::size_t>(r)];
    if (static_cast<int>(row.size()) != cols) {
      throw ScenarioSyntaxError(grid_first_line + r, 2 + std::min(cols, static_cast<int>(row.size())),
                                "grid is not rectangular: expected " + std::to_string(cols) + " columns, got " +
                                    std::to_string(row.size()));
    }
    for (int c = 0; c < cols; ++c) {
      bool spawn = false;
      bool ok = false;
      const auto kind = kind_from_char(row[static_cast<std::size_t>(c)], spawn, ok);
      if (!ok) {
        throw ScenarioSyntaxError(grid_first_line + r, c + 2,
                                  std::string("unknown grid character '") + row[static_cast<std::size_t>(c)] + "'");
      }
      auto& cell = spec.grid.at({r, c});
      cell.kind = kind;
      cell.spawn = spawn;
      if (spawn) spec.spawns.push_back({r, c});
    }
  }

  // Rooms claim the floor/door/stair cells inside their rectangle. Out of
  // bounds and overlap are reported by validate(); only the first claimant
  // is recorded on the cell.
  for (const auto& pr : pending_rooms) {
    Room room;
    room.id = pr.id;
    room.ignitable = pr.ignitable;
    const int r0 = std::min(pr.rect[0], pr.rect[2]);
    const int r1 = std::max(pr.rect[0], pr.rect[2]);
    const int c0 = std::min(pr.rect[1], pr.rect[3]);
    const int c1 = std::max(pr.rect[1], pr.rect[3]);
    if (!spec.grid.in_bounds({r0, c0}) || !spec.grid.in_bounds({r1, c1})) {
      throw ScenarioSyntaxError(pr.line, 1, "room '" + pr.id + "' rectangle is out of bounds");
    }
    const int index = static_cast<int>(spec.rooms.size());
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        auto& cell = spec.grid.at({r, c});
        if (cell.kind != CellKind::Floor && cell.kind != CellKind::Door && cell.kind != CellKind::Stair) continue;
        room.cells.push_back({r, c});
        if (cell.room < 0) cell.room = index;
      }
    }
    spec.rooms.push_back(std::move(room));
  }
  return spec;
}

ValidationReport validate(const ScenarioSpec& spec) {
  ValidationReport report;
  auto error = [&](std::string code, std::string message, std::optional<CellPos> at = std::nullopt) {
    report.findings.push_back({Severity::Error, std::move(code), std::move(message), at});
  };
  auto warning = [&](std::string code, std::string message, std::optional<CellPos> at = std::nullopt) {
    report.findings.push_back({Severity::Warning, std::move(code), std::move(message), at});
  };
  const auto& g = spec.grid;

  if (g.empty()) {
    error("grid_empty", "grid is empty");
    return report;
  }
  if (!(spec.cell_size > 0.0)) error("cell_size", "cell_size must be positive");

  // Rooms
  std::set<std::string> room_ids;
  std::map<CellPos, std::string> claimed;
  for (const auto& room : spec.rooms) {
    if (!room_ids.insert(room.id).second) error("duplicate_id", "duplicate room id '" + room.id + "'");
    if (room.cells.empty()) error("room_empty", "room '" + room.id + "' has no floor, door or stair cells");
    for (const auto& p : room.cells) {
      if (!g.in_bounds(p)) {
        error("out_of_bounds", "room '" + room.id + "' cell out of bounds", p);
        continue;
      }
      const auto k = g.at(p).kind;
      if (k != CellKind::Floor && k != CellKind::Door && k != CellKind::Stair) {
        error("room_cell_kind", "room '" + room.id + "' contains a " + std::string(to_string(k)) + " cell", p);
      }
      const auto [it, inserted] = claimed.emplace(p, room.id);
      if (!inserted) error("room_overlap", "rooms '" + it->second + "' and '" + room.id + "' share a cell", p);
    }
  }
  if (std::none_of(spec.rooms.begin(), spec.rooms.end(), [](const Room& r) { return r.ignitable && !r.cells.empty(); })) {
    warning("fire_cannot_ignite", "fire cannot ignite: no ignitable room");
  }

  // Exits
  std::set<std::string> exit_ids;
  std::set<CellPos> exit_cells;
  if (spec.exits.empty()) error("no_exit", "scenario has no exit");
  for (const auto& e : spec.exits) {
    if (!exit_ids.insert(e.id).second) error("duplicate_id", "duplicate exit id '" + e.id + "'");
    if (e.cells.empty()) error("exit_empty", "exit '" + e.id + "' has no cells");
    for (const auto& p : e.cells) {
      if (!g.in_bounds(p)) {
        error("out_of_bounds", "exit '" + e.id + "' cell out of bounds", p);
        continue;
      }
      if (g.at(p).kind != CellKind::Exit) error("exit_cell_kind", "exit '" + e.id + "' cell is not an exit cell", p);
      if (!exit_cells.insert(p).second) error("exit_overlap", "exit cell belongs to more than one exit", p);
    }
  }
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) {
      if (g.at({r, c}).kind == CellKind::Exit && !exit_cells.contains({r, c})) {
        error("exit_unassigned", "exit cell not assigned to any exit", CellPos{r, c});
      }
    }
  }

  // Signs
  for (const auto& s : spec.signs) {
    if (!g.in_bounds(s.cell)) error("out_of_bounds", "sign out of bounds", s.cell);
    if (!exit_ids.contains(s.points_to)) error("dangling_sign", "dangling sign: no exit '" + s.points_to + "'", s.cell);
  }

  // Spawns reach an exit
  if (!spec.exits.empty()) {
    for (const auto& s : spec.spawns) {
      const auto dist = distance_field(spec, s, {});
      bool reachable = false;
      for (const auto& p : exit_cells) {
        if (dist[static_cast<std::size_t>(p.row * g.cols() + p.col)] >= 0) {
          reachable = true;
          break;
        }
      }
      if (!reachable) error("spawn_unreachable", "spawn unreachable: no exit reachable from spawn", s);
    }
  }

  // Entry route
  if (!spec.entry_route.empty()) {
    bool broken = false;
    for (std::size_t i = 0; i < spec.entry_route.size(); ++i) {
      const auto p = spec.entry_route[i];
      if (!g.passable(p)) {
        error("entry_route_impassable", "entry_route cell is not passable", p);
        broken = true;
      }
      if (i > 0 && !adjacent(spec.entry_route[i - 1], p)) {
        error("entry_route_broken", "entry_route cells are not 4-adjacent", p);
        broken = true;
      }
    }
    const auto last = spec.entry_route.back();
    if (!broken && !(g.in_bounds(last) && g.at(last).spawn)) {
      error("entry_route_end", "entry_route must end on a spawn cell", last);
    }
    for (std::size_t i = 1; !broken && i + 1 < spec.entry_route.size(); ++i) {
      if (g.at(spec.entry_route[i]).kind == CellKind::Exit) {
        error("entry_route_exit", "entry_route passes through an exit cell", spec.entry_route[i]);
      }
    }
  }

  // Calibration paths
  std::set<std::string> path_ids;
  for (const auto& p : spec.calibration_paths) {
    if (!path_ids.insert(p.id).second) error("duplicate_id", "duplicate path id '" + p.id + "'");
    if (!(p.declared_length > 0.0)) error("path_length", "path '" + p.id + "' length must be positive");
    if (!g.passable(p.from)) error("path_endpoint", "path '" + p.id + "' start is not passable", p.from);
    if (!g.passable(p.to)) error("path_endpoint", "path '" + p.id + "' end is not passable", p.to);
    if (g.passable(p.from) && g.passable(p.to)) {
      const auto route = shortest_path(spec, p.from, p.to);
      if (!route) {
        error("path_disconnected", "path '" + p.id + "' endpoints are disconnected", p.from);
      } else if (std::abs(route->length - p.declared_length) > 1e-9 * std::max(1.0, p.declared_length)) {
        warning("path_length_mismatch", "path '" + p.id + "' declared " + format_number(p.declared_length) +
                                            " m but shortest route is " + format_number(route->length) + " m",
                p.from);
      }
    }
  }
  return report;
}

ScenarioSpec parse_scenario(std::string_view document) {
  auto spec = parse_scenario_unchecked(document);
  auto report = validate(spec);
  if (report.has_errors()) throw ScenarioSemanticError(std::move(report));
  return spec;
}

ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string serialize_scenario(const ScenarioSpec& spec) {
  std::ostringstream os;
  os << "name: " << spec.name << '\n';
  os << "cell_size: " << format_number(spec.cell_size) << '\n';
  os << "spread_interval: " << format_number(spec.spread_interval) << '\n';
  os << "grid:\n";
  for (int r = 0; r < spec.grid.rows(); ++r) {
    os << '|';
    for (int c = 0; c < spec.grid.cols(); ++c) os << char_from_cell(spec.grid.at({r, c}));
    os << "|\n";
  }
  for (const auto& room : spec.rooms) {
    int r0 = spec.grid.rows(), c0 = spec.grid.cols(), r1 = -1, c1 = -1;
    for (const auto& p : room.cells) {
      r0 = std::min(r0, p.row);
      c0 = std::min(c0, p.col);
      r1 = std::max(r1, p.row);
      c1 = std::max(c1, p.col);
    }
    if (room.cells.empty()) r0 = c0 = r1 = c1 = 0;
    os << "room " << room.id << " ignitable=" << (room.ignitable ? "true" : "false") << " rect=" << r0 << ','
       << c0 << ',' << r1 << ',' << c1 << '\n';
  }
  for (const auto& e : spec.exits) {
    os << "exit " << e.id << " kind=" << to_string(e.kind) << " cells=" << format_cell_list(e.cells) << '\n';
  }
  for (const auto& s : spec.signs) os << "sign at=" << format_cell(s.cell) << " to=" << s.points_to << '\n';
  if (!spec.entry_route.empty()) os << "entry_route cells=" << format_cell_list(spec.entry_route) << '\n';
  for (const auto& p : spec.calibration_paths) {
    os << "path " << p.id << " from=" << format_cell(p.from) << " to=" << format_cell(p.to)
       << " length=" << format_number(p.declared_length);
    if (p.real_time) os << " real_time=" << format_number(*p.real_time);
    os << '\n';
  }
  return os.str();
}

std::string to_string(const Finding& f) {
  std::string s = f.severity == Severity::Error ? "error" : "warning";
  s += " [" + f.code + "]";
  if (f.location) s += " at " + format_cell(*f.location);
  s += ": " + f.message;
  return s;
}

// --- queries -------------------------------------------------------------

std::vector<int> distance_field(const ScenarioSpec& spec, CellPos origin, const CellSet& blocked) {
  const auto& g = spec.grid;
  std::vector<int> dist(static_cast<std::size_t>(g.rows() * g.cols()), -1);
  auto idx = [&](CellPos p) { return static_cast<std::size_t>(p.row * g.cols() + p.col); };
  if (!g.in_bounds(origin)) return dist;
  std::deque<CellPos> queue{origin};
  dist[idx(origin)] = 0;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    if (u != origin && g.at(u).kind == CellKind::Exit) continue;
    for (Direction d : kDirectionOrder) {
      const auto v = step(u, d);
      if (!g.passable(v) || blocked.contains(v) || dist[idx(v)] >= 0) continue;
      dist[idx(v)] = dist[idx(u)] + 1;
      queue.push_back(v);
    }
  }
  return dist;
}

std::optional<Route> shortest_path(const ScenarioSpec& spec, CellPos from, CellPos to, const CellSet& blocked) {
  const auto& g = spec.grid;
  if (!g.in_bounds(from) || !g.in_bounds(to)) throw std::invalid_argument("shortest_path: endpoint out of bounds");
  if (!g.passable(from) || !g.passable(to)) throw std::invalid_argument("shortest_path: endpoint not passable");
  if (from == to) return make_route(spec, {from});
  if (blocked.contains(to)) return std::nullopt;

  // A blocked source can still be left.
  std::optional<CellSet> unblocked_source;
  if (blocked.contains(from)) {
    unblocked_source = blocked;
    unblocked_source->erase(from);
  }

  // Distances towards `to`; walking downhill from `from` in fixed direction
  // order yields the preferred route among all shortest ones.
  const auto dist = distance_field(spec, to, unblocked_source ? *unblocked_source : blocked);
  auto at = [&](CellPos p) { return dist[static_cast<std::size_t>(p.row * g.cols() + p.col)]; };
  if (at(from) < 0) return std::nullopt;

  std::vector<CellPos> cells{from};
  cells.reserve(static_cast<std::size_t>(at(from)) + 1);
  CellPos u = from;
  while (u != to) {
    const int du = at(u);
    bool moved = false;
    for (Direction d : kDirectionOrder) {
      const auto v = step(u, d);
      if (!g.in_bounds(v) || at(v) != du - 1) continue;
      if (v != to && g.at(v).kind == CellKind::Exit) continue;
      u = v;
      moved = true;
      break;
    }
    if (!moved) return std::nullopt;  // unreachable by construction
    cells.push_back(u);
  }
  return make_route(spec, std::move(cells));
}

std::optional<ExitRoute> nearest_exit(const ScenarioSpec& spec, CellPos from, const CellSet& blocked) {
  const auto& g = spec.grid;
  if (!g.in_bounds(from)) return std::nullopt;
  const auto dist = distance_field(spec, from, blocked);
  auto at = [&](CellPos p) { return dist[static_cast<std::size_t>(p.row * g.cols() + p.col)]; };

  const Exit* best = nullptr;
  CellPos best_cell{};
  int best_dist = -1;
  for (const auto& e : spec.exits) {
    for (const auto& p : e.cells) {
      if (!g.in_bounds(p) || blocked.contains(p)) continue;
      const int d = at(p);
      if (d < 0) continue;
      const bool better = best == nullptr || d < best_dist || (d == best_dist && e.id < best->id) ||
                          (d == best_dist && e.id == best->id && p < best_cell);
      if (better) {
        best = &e;
        best_cell = p;
        best_dist = d;
      }
    }
  }
  if (best == nullptr) return std::nullopt;
  auto route = shortest_path(spec, from, best_cell, blocked);
  if (!route) return std::nullopt;
  return ExitRoute{best->id, std::move(*route)};
}

std::string_view to_string(CellKind k) {
  switch (k) {
    case CellKind::Floor: return "floor";
    case CellKind::Wall: return "wall";
    case CellKind::Door: return "door";
    case CellKind::Stair: return "stair";
    case CellKind::Exit: return "exit";
    case CellKind::Void: return "void";
  }
  return "?";
}

std::string_view to_string(ExitKind k) { return k == ExitKind::Main ? "main" : "emergency"; }

}  // namespace evac
