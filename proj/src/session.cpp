#include "evac/session.hpp"

#include <algorithm>
#include <cmath>

namespace evac {

namespace {

constexpr double kProgressEps = 1e-9;

nlohmann::json profile_json(const AgentProfile& p) {
  return {{"speed", p.speed}, {"stair_factor", p.stair_factor}, {"familiar", p.familiar}, {"gamer", p.gamer}};
}

}  // namespace

nlohmann::json cell_json(CellPos p) { return nlohmann::json::array({p.row, p.col}); }

std::string_view to_string(Mode m) { return m == Mode::Interactive ? "interactive" : "headless"; }

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Escaped: return "escaped";
    case Outcome::Trapped: return "trapped";
    case Outcome::Finished: return "finished";
  }
  return "?";
}

std::string_view key_name(const Input& in) {
  switch (in.kind) {
    case Input::Kind::Jump: return "space";
    case Input::Kind::StartFire: return "O";
    case Input::Kind::Move:
      switch (in.direction) {
        case Direction::Up: return "W";
        case Direction::Left: return "A";
        case Direction::Down: return "S";
        case Direction::Right: return "D";
      }
  }
  return "?";
}

std::optional<Input> input_from_key(std::string_view key) {
  if (key == "W") return Input::move(Direction::Up);
  if (key == "A") return Input::move(Direction::Left);
  if (key == "S") return Input::move(Direction::Down);
  if (key == "D") return Input::move(Direction::Right);
  if (key == "space") return Input::jump();
  if (key == "O") return Input::start_fire();
  return std::nullopt;
}

Session::Session(std::shared_ptr<const ScenarioSpec> spec, SessionConfig config, Mode mode, PopulationSpec population,
                 std::optional<AgentProfile> player)
    : spec_(std::move(spec)),
      config_(config),
      mode_(mode),
      population_(population),
      rng_(config.seed),
      fire_rng_(splitmix64(config.seed)) {
  if (!spec_) throw SessionError("session needs a scenario");
  if (!(config_.tick_dt > 0.0)) throw SessionError("tick_dt must be positive");
  check(config_.behavior);
  check(config_.agent_profile);
  if (population_.familiar_gamers < 0 || population_.familiar_nongamers < 0 || population_.unfamiliar_gamers < 0 ||
      population_.unfamiliar_nongamers < 0) {
    throw SessionError("population counts must be non-negative");
  }
  if (population_.total() <= 0) throw SessionError("population must contain at least one agent");
  if (mode_ == Mode::Interactive && !player) throw SessionError("interactive sessions need a player");
  if (player) check(*player);

  fire_config_.spread_interval = config_.spread_interval.value_or(spec_->spread_interval);
  fire_config_.seed = splitmix64(config_.seed);
  if (!(fire_config_.spread_interval > 0.0)) throw SessionError("spread_interval must be positive");
  if (config_.fire_enabled) {
    const bool ignitable = std::any_of(spec_->rooms.begin(), spec_->rooms.end(),
                                       [](const Room& r) { return r.ignitable && !r.cells.empty(); });
    if (!ignitable) throw SessionError("fire cannot ignite: scenario has no ignitable room");
  }

  const auto spawns = spec_->spawn_order();
  const auto needed = static_cast<std::size_t>(population_.total()) + (player ? 1U : 0U);
  if (needed > spawns.size()) {
    throw SessionError("population of " + std::to_string(needed) + " exceeds " + std::to_string(spawns.size()) +
                       " spawn cells");
  }
  occupancy_ = Occupancy(spec_->grid.rows(), spec_->grid.cols());

  std::size_t next_spawn = 0;
  if (player) {
    AgentState p;
    p.id = 0;
    p.profile = *player;
    p.cell = spawns[next_spawn++];
    p.status = AgentStatus::Idle;
    occupancy_.place(p.cell, kPlayerOccupant);
    player_ = std::move(p);
  }

  // Category per slot, shuffled so id priority does not follow category.
  std::vector<std::pair<bool, bool>> categories;  // (familiar, gamer)
  categories.insert(categories.end(), static_cast<std::size_t>(population_.familiar_gamers), {true, true});
  categories.insert(categories.end(), static_cast<std::size_t>(population_.familiar_nongamers), {true, false});
  categories.insert(categories.end(), static_cast<std::size_t>(population_.unfamiliar_gamers), {false, true});
  categories.insert(categories.end(), static_cast<std::size_t>(population_.unfamiliar_nongamers), {false, false});
  for (std::size_t i = categories.size(); i > 1; --i) {
    std::swap(categories[i - 1], categories[uniform_index(rng_, i)]);
  }

  agents_.reserve(categories.size());
  for (std::size_t i = 0; i < categories.size(); ++i) {
    AgentState a;
    a.id = static_cast<std::uint32_t>(i);
    a.profile = config_.agent_profile;
    a.profile.familiar = categories[i].first;
    a.profile.gamer = categories[i].second;
    a.cell = spawns[next_spawn++];
    a.intent = choose_intent(a.profile, config_.behavior, rng_);
    a.status = AgentStatus::Idle;
    occupancy_.place(a.cell, a.id);
    agents_.push_back(std::move(a));
  }
  choices_.resize(agents_.size());

  if (config_.logging) {
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& a : agents_) {
      agents.push_back({{"id", a.id},
                        {"cell", cell_json(a.cell)},
                        {"familiar", a.profile.familiar},
                        {"gamer", a.profile.gamer},
                        {"intent", std::string(to_string(a.intent))}});
    }
    record(EventKind::SessionStart,
        {{"scenario", spec_->name},
         {"scenario_document", serialize_scenario(*spec_)},
         {"mode", std::string(to_string(mode_))},
         {"seed", config_.seed},
         {"tick_dt", config_.tick_dt},
         {"fire_enabled", config_.fire_enabled},
         {"spread_interval", fire_config_.spread_interval},
         {"time_cap", config_.time_cap},
         {"behavior",
          {{"p_nearest_given_familiar", config_.behavior.p_nearest_given_familiar},
           {"p_retrace_given_unfamiliar", config_.behavior.p_retrace_given_unfamiliar}}},
         {"agent_profile", profile_json(config_.agent_profile)},
         {"population",
          {{"familiar_gamers", population_.familiar_gamers},
           {"familiar_nongamers", population_.familiar_nongamers},
           {"unfamiliar_gamers", population_.unfamiliar_gamers},
           {"unfamiliar_nongamers", population_.unfamiliar_nongamers}}},
         {"player", player_ ? nlohmann::json{{"cell", cell_json(player_->cell)}, {"profile", profile_json(player_->profile)}}
                            : nlohmann::json(nullptr)},
         {"agents", std::move(agents)}});
  }

  if (mode_ == Mode::Headless) trigger_alarm();
}

void Session::record(EventKind kind, nlohmann::json payload) {
  if (config_.logging) log_.append(clock_, kind, std::move(payload));
}

void Session::apply_input(const Input& input) {
  if (!running()) throw SessionError("session has ended");
  record(EventKind::Input, {{"tick", tick_count_}, {"key", std::string(key_name(input))}});
  switch (input.kind) {
    case Input::Kind::Move:
      heading_ = input.direction;
      break;
    case Input::Kind::Jump:
      break;
    case Input::Kind::StartFire:
      if (!alarm_started_) trigger_alarm();
      break;
  }
}

void Session::trigger_alarm() {
  alarm_started_ = true;
  timer_origin_ = clock_;
  record(EventKind::Alarm);
  if (config_.fire_enabled) {
    fire_ = ignite(*spec_, fire_config_, fire_rng_, clock_);
    record(EventKind::Ignition, {{"room", fire_->ignition_room >= 0
                                           ? nlohmann::json(spec_->rooms[static_cast<std::size_t>(fire_->ignition_room)].id)
                                           : nlohmann::json(nullptr)},
                              {"cell", cell_json(fire_->ignition_cell)}});
  }
  const auto* burning = fire();
  static const CellSet kNone;
  const CellSet& blocked = burning != nullptr ? burning->burning : kNone;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    auto& a = agents_[i];
    if (const auto nearest = nearest_exit(*spec_, a.cell, blocked)) choices_[i].nearest_exit = nearest->exit_id;
    a = start_evacuating(std::move(a), *spec_, burning);
    if (a.status == AgentStatus::Trapped) {
      occupancy_.clear(a.cell);
      record(EventKind::AgentTrapped, {{"agent", a.id}, {"cell", cell_json(a.cell)}});
      continue;
    }
    if (const auto* e = spec_->exit_at(a.route.cells.back())) choices_[i].initial_exit = e->id;
  }
  if (player_) {
    if (const auto nearest = nearest_exit(*spec_, player_->cell, blocked)) player_nearest_exit_ = nearest->exit_id;
    player_->status = AgentStatus::Evacuating;
  }
}

void Session::tick() {
  if (!running()) throw SessionError("session has ended");
  ++tick_count_;
  clock_ = static_cast<double>(tick_count_) * config_.tick_dt;

  bool fire_changed = false;
  if (fire_) {
    const auto due = static_cast<int>(
        std::floor((clock_ - fire_->ignited_at) / fire_config_.spread_interval + 1e-9));
    if (due > fire_->spread_count) {
      std::optional<CellSet> before;
      if (config_.logging) before = fire_->burning;
      fire_ = fire_step(std::move(*fire_), *spec_, fire_config_, clock_);
      fire_changed = true;
      if (before) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& p : fire_->burning.cells()) {
          if (!before->contains(p)) cells.push_back(cell_json(p));
        }
        record(EventKind::FireSpread, {{"step", fire_->spread_count}, {"cells", std::move(cells)}});
      }
    }
  }

  if (alarm_started_) {
    std::vector<MoveEvent> moves;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      if (agents_[i].status != AgentStatus::Evacuating) continue;
      if (fire_changed) {
        agents_[i] = replan_if_blocked(std::move(agents_[i]), *spec_, fire());
        if (agents_[i].status == AgentStatus::Trapped) {
          occupancy_.clear(agents_[i].cell);
          record(EventKind::AgentTrapped, {{"agent", agents_[i].id}, {"cell", cell_json(agents_[i].cell)}});
          continue;
        }
      }
      World world{*spec_, fire(), occupancy_, clock_, &agents_, config_.logging ? &moves : nullptr};
      auto updated = agent_tick(agents_[i], world, config_.tick_dt);
      if (updated.status == AgentStatus::Trapped) {
        occupancy_.clear(updated.cell);
        record(EventKind::AgentTrapped, {{"agent", updated.id}, {"cell", cell_json(updated.cell)}});
      }
      agents_[i] = std::move(updated);
      for (const auto& m : moves) {
        record(EventKind::AgentMove, {{"agent", m.agent}, {"from", cell_json(m.from)}, {"to", cell_json(m.to)}});
      }
      moves.clear();
      if (agents_[i].status == AgentStatus::Escaped) {
        record(EventKind::AgentEscaped,
            {{"agent", agents_[i].id}, {"exit", agents_[i].exit_id}, {"time", *agents_[i].escape_time - timer_origin_}});
      }
    }
  }

  if (player_) update_player(fire_changed);
}

void Session::update_player(bool fire_changed) {
  auto& p = *player_;
  const auto& spec = *spec_;
  const auto* burning = fire();

  if (fire_changed && burning != nullptr && !nearest_exit(spec, p.cell, burning->burning)) {
    p.status = AgentStatus::Trapped;
    record(EventKind::AgentTrapped, {{"agent", "player"}, {"cell", cell_json(p.cell)}});
    end(Outcome::Trapped);
    return;
  }
  if (!heading_) return;

  const double step_cost = spec.cell_size;
  auto blocked = [&](CellPos target) {
    if (!spec.grid.passable(target)) return true;
    if (burning != nullptr && burning->burning.contains(target)) return true;
    if (!alarm_started_ && spec.grid.at(target).kind == CellKind::Exit) return true;
    return occupancy_.occupied(target);
  };

  const auto first = step(p.cell, *heading_);
  const double factor =
      spec.grid.in_bounds(first) && spec.grid.at(first).kind == CellKind::Stair ? p.profile.stair_factor : 1.0;
  p.progress += p.profile.speed * factor * config_.tick_dt;
  while (p.progress + kProgressEps >= step_cost) {
    const auto target = step(p.cell, *heading_);
    if (blocked(target)) {
      p.progress = step_cost;
      break;
    }
    occupancy_.clear(p.cell);
    record(EventKind::AgentMove, {{"agent", "player"}, {"from", cell_json(p.cell)}, {"to", cell_json(target)}});
    p.cell = target;
    p.progress -= step_cost;
    if (spec.grid.at(target).kind == CellKind::Exit) {
      p.status = AgentStatus::Escaped;
      p.escape_time = clock_;
      escape_clock_ = clock_;
      const auto* e = spec.exit_at(target);
      player_exit_ = e != nullptr ? e->id : std::string{};
      record(EventKind::PlayerEscaped, {{"exit", player_exit_}, {"score", clock_ - timer_origin_}});
      end(Outcome::Escaped);
      return;
    }
    occupancy_.place(target, kPlayerOccupant);
  }
}

void Session::end(Outcome outcome) {
  outcome_ = outcome;
  nlohmann::json payload{{"outcome", std::string(to_string(outcome))}, {"tick", tick_count_}, {"truncated", truncated_}};
  if (outcome == Outcome::Escaped) payload["score"] = score();
  record(EventKind::SessionEnd, std::move(payload));
}

void Session::finish(bool truncated) {
  if (!running()) throw SessionError("session has ended");
  truncated_ = truncated;
  end(Outcome::Finished);
}

double Session::score() const {
  if (outcome_ != Outcome::Escaped || !escape_clock_) throw SessionError("score is defined only for escaped sessions");
  return *escape_clock_ - timer_origin_;
}

bool Session::all_agents_done() const {
  return std::all_of(agents_.begin(), agents_.end(), [](const AgentState& a) {
    return a.status == AgentStatus::Escaped || a.status == AgentStatus::Trapped;
  });
}

}  // namespace evac
