#include "evac/server/protocol.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <random>

namespace evac::server {

using nlohmann::json;

HostEnvironment HostEnvironment::system() {
  auto rd = std::make_shared<std::random_device>();
  HostEnvironment env;
  env.new_session_id = [rd] {
    char buf[32];
    const std::uint64_t hi = (*rd)();
    const std::uint64_t lo = (*rd)();
    std::snprintf(buf, sizeof buf, "s-%016llx", static_cast<unsigned long long>((hi << 32) ^ lo));
    return std::string(buf);
  };
  env.new_seed = [rd] { return (static_cast<std::uint64_t>((*rd)()) << 32) ^ (*rd)(); };
  env.now_utc = [] {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
  };
  env.operator_log = [](const std::string& line) { std::cerr << line << '\n'; };
  return env;
}

json scenario_snapshot(const ScenarioSpec& spec) {
  json rows = json::array();
  for (int r = 0; r < spec.grid.rows(); ++r) {
    std::string row;
    for (int c = 0; c < spec.grid.cols(); ++c) {
      switch (spec.grid.at({r, c}).kind) {
        case CellKind::Floor: row += '.'; break;
        case CellKind::Wall: row += '#'; break;
        case CellKind::Door: row += 'D'; break;
        case CellKind::Stair: row += 'S'; break;
        case CellKind::Exit: row += 'E'; break;
        case CellKind::Void: row += ' '; break;
      }
    }
    rows.push_back(std::move(row));
  }
  json exits = json::array();
  for (const auto& e : spec.exits) {
    json cells = json::array();
    for (const auto& p : e.cells) cells.push_back(cell_json(p));
    exits.push_back({{"id", e.id}, {"kind", to_string(e.kind)}, {"cells", cells}});
  }
  json signs = json::array();
  for (const auto& s : spec.signs) signs.push_back({{"cell", cell_json(s.cell)}, {"exit", s.points_to}});
  const auto order = spec.spawn_order();
  const json spawn = order.empty() ? json(nullptr) : cell_json(order.front());
  return {{"name", spec.name},   {"cell_size", spec.cell_size}, {"height", spec.grid.rows()},
          {"width", spec.grid.cols()}, {"rows", rows},           {"exits", exits},
          {"signs", signs},      {"spawn", spawn}};
}

json state_message(const Session& session) {
  json player = nullptr;
  if (const auto* p = session.player()) {
    const auto heading = session.player_heading();
    player = {{"cell", cell_json(p->cell)},
              {"status", to_string(p->status)},
              {"heading", heading ? json(to_string(*heading)) : json(nullptr)}};
  }
  json agents = json::array();
  for (const auto& a : session.agents()) {
    agents.push_back({{"id", a.id}, {"cell", cell_json(a.cell)}, {"status", to_string(a.status)}});
  }
  json burning = json::array();
  if (const auto* f = session.fire()) {
    for (const auto& c : f->burning.cells()) burning.push_back(cell_json(c));
  }
  return {{"kind", "state"},
          {"tick", session.tick_count()},
          {"player", player},
          {"agents", agents},
          {"burning", burning},
          {"timer_running", session.alarm_started() && session.running()},
          {"elapsed", session.elapsed()}};
}

json error_message(std::string_view code, std::string_view detail) {
  return {{"kind", "error"}, {"code", code}, {"detail", detail}};
}

SessionHost::SessionHost(const ScenarioCatalog& catalog, SessionStore* store, HostConfig config, HostEnvironment env)
    : catalog_(catalog), store_(store), config_(std::move(config)), env_(std::move(env)) {
  if (config_.state_stride == 0) config_.state_stride = 1;
  if (config_.outbox_capacity == 0) config_.outbox_capacity = 1;
}

void SessionHost::send(json msg, bool droppable) {
  // Drop the oldest state message first; control messages are never dropped.
  while (outbox_.size() >= config_.outbox_capacity) {
    auto it = std::find_if(outbox_.begin(), outbox_.end(), [](const Outgoing& o) { return o.droppable; });
    if (it == outbox_.end()) break;
    outbox_.erase(it);
    ++dropped_states_;
  }
  if (droppable && outbox_.size() >= config_.outbox_capacity) {
    ++dropped_states_;
    return;
  }
  outbox_.push_back({msg.dump(), droppable});
}

std::optional<std::string> SessionHost::pop_outgoing() {
  if (outbox_.empty()) return std::nullopt;
  auto text = std::move(outbox_.front().text);
  outbox_.pop_front();
  return text;
}

void SessionHost::on_message(std::string_view text) {
  if (closed_) return;
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error&) {
    send(error_message("bad_message", "not valid JSON"));
    return;
  }
  if (!msg.is_object() || !msg.contains("kind") || !msg["kind"].is_string()) {
    send(error_message("bad_message", "missing kind"));
    return;
  }
  if (msg.contains("seq")) {
    if (!msg["seq"].is_number_integer()) {
      send(error_message("bad_message", "seq must be an integer"));
      return;
    }
    const auto seq = msg["seq"].get<std::int64_t>();
    if (last_seq_ && seq <= *last_seq_) {
      ++dropped_inputs_;
      return;
    }
    last_seq_ = seq;
  }
  const auto kind = msg["kind"].get<std::string>();
  if (kind == "join") {
    handle_join(msg);
  } else if (kind == "input") {
    handle_input(msg);
  } else if (kind == "leave") {
    handle_leave();
  } else {
    send(error_message("bad_message", "unknown kind '" + kind + "'"));
  }
}

void SessionHost::handle_join(const json& msg) {
  if (session_) {
    send(error_message("already_joined", "this connection already has a session"));
    return;
  }
  const auto scenario_id = msg.contains("scenario") && msg["scenario"].is_string() ? msg["scenario"].get<std::string>() : std::string();
  const auto spec = catalog_.find(scenario_id);
  if (!spec) {
    send(error_message("scenario_not_found", "no scenario '" + scenario_id + "'"));
    return;
  }
  if (!msg.value("familiar", json()).is_boolean() || !msg.value("gamer", json()).is_boolean()) {
    send(error_message("bad_message", "join requires boolean familiar and gamer"));
    return;
  }
  const bool familiar = msg["familiar"].get<bool>();
  const bool gamer = msg["gamer"].get<bool>();
  auto config = config_.session;
  config.seed = env_.new_seed();
  auto player = config.agent_profile;
  player.familiar = familiar;
  player.gamer = gamer;
  try {
    session_ = std::make_unique<Session>(spec, config, Mode::Interactive, config_.population, player);
  } catch (const std::exception& e) {
    send(error_message("session_error", e.what()));
    return;
  }
  session_id_ = env_.new_session_id();
  started_at_ = env_.now_utc();
  send({{"kind", "joined"}, {"session_id", session_id_}, {"scenario", scenario_snapshot(*spec)}});
}

void SessionHost::handle_input(const json& msg) {
  if (!session_) {
    send(error_message("no_session", "join first"));
    return;
  }
  if (!session_->running()) {
    send(error_message("session_ended", "the session has ended"));
    return;
  }
  const auto key = msg.contains("key") && msg["key"].is_string() ? msg["key"].get<std::string>() : std::string();
  const auto in = input_from_key(key);
  if (!in) {
    send(error_message("bad_input", "unknown key '" + key + "'"));
    return;
  }
  pending_.push_back(*in);
}

void SessionHost::handle_leave() {
  // An abandoned session is not terminal and is not stored.
  closed_ = true;
  pending_.clear();
  session_.reset();
}

void SessionHost::on_tick() {
  if (!ticking()) return;
  while (!pending_.empty() && session_->running()) {
    session_->apply_input(pending_.front());
    pending_.pop_front();
  }
  if (session_->running()) session_->tick();
  if (session_->tick_count() % config_.state_stride == 0) send(state_message(*session_), true);
  finish_if_ended();
}

void SessionHost::finish_if_ended() {
  if (ended_sent_ || session_->running()) return;
  ended_sent_ = true;
  pending_.clear();
  const bool escaped = session_->outcome() == Outcome::Escaped;
  send({{"kind", "ended"},
        {"outcome", to_string(session_->outcome())},
        {"score", escaped ? json(session_->score()) : json(nullptr)}});
  if (!store_) return;
  SessionSummary s;
  s.session_id = session_id_;
  s.scenario = session_->spec().name;
  s.familiar = session_->player()->profile.familiar;
  s.gamer = session_->player()->profile.gamer;
  s.outcome = std::string(to_string(session_->outcome()));
  if (escaped) s.score = session_->score();
  s.exit = session_->player_exit();
  s.nearest_exit = session_->player_nearest_exit();
  s.seed = session_->config().seed;
  s.started_at = started_at_;
  s.event_digest = digest_hex(session_->log().serialize());
  try {
    store_->persist(s, session_->log());
    persisted_ = true;
  } catch (const std::exception& e) {
    if (env_.operator_log) env_.operator_log("session " + session_id_ + " not stored: " + e.what());
  }
}

}  // namespace evac::server
