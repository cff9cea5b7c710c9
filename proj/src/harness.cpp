#include "evac/harness.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace evac {

namespace {

std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

void drive(Session& session, const std::vector<ScriptedInput>& inputs, std::optional<std::uint64_t> max_ticks) {
  std::size_t next = 0;
  const double cap = session.config().time_cap;
  while (session.running()) {
    while (next < inputs.size() && inputs[next].tick <= session.tick_count() && session.running()) {
      session.apply_input(inputs[next].input);
      ++next;
    }
    if (!session.running()) break;
    if (session.player() == nullptr && session.all_agents_done()) {
      session.finish(false);
      break;
    }
    if (session.mode() == Mode::Headless && session.clock() + 1e-9 >= cap) {
      session.finish(true);
      break;
    }
    if (max_ticks && session.tick_count() >= *max_ticks) break;
    session.tick();
  }
}

}  // namespace

std::string_view to_string(AgentOutcomeKind k) {
  switch (k) {
    case AgentOutcomeKind::Escaped: return "escaped";
    case AgentOutcomeKind::Trapped: return "trapped";
    case AgentOutcomeKind::Truncated: return "truncated";
  }
  return "?";
}

void drive_to_end(Session& session, const std::vector<ScriptedInput>& inputs) { drive(session, inputs, std::nullopt); }

SessionResult summarize(const Session& session) {
  SessionResult r;
  r.outcome = session.outcome();
  r.truncated = session.truncated();
  r.ticks = session.tick_count();
  if (session.outcome() == Outcome::Escaped) r.player_score = session.score();
  const auto& agents = session.agents();
  const auto& choices = session.choices();
  r.agents.reserve(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    AgentOutcome o;
    o.id = a.id;
    o.familiar = a.profile.familiar;
    o.gamer = a.profile.gamer;
    o.intent = a.intent;
    switch (a.status) {
      case AgentStatus::Escaped:
        o.outcome = AgentOutcomeKind::Escaped;
        o.exit = a.exit_id;
        o.escape_time = *a.escape_time - session.timer_origin();
        break;
      case AgentStatus::Trapped: o.outcome = AgentOutcomeKind::Trapped; break;
      default: o.outcome = AgentOutcomeKind::Truncated; break;
    }
    o.initial_exit = choices[i].initial_exit;
    o.nearest_exit = choices[i].nearest_exit;
    r.agents.push_back(std::move(o));
  }
  r.log = session.log();
  r.digest = digest_hex(r.log.serialize());
  return r;
}

SessionResult run_headless(std::shared_ptr<const ScenarioSpec> spec, const SessionConfig& config,
                           const PopulationSpec& population, const HeadlessOptions& options) {
  Session session(std::move(spec), config, Mode::Headless, population, options.player);
  drive(session, options.inputs, std::nullopt);
  return summarize(session);
}

// --- replay ------------------------------------------------------------------

ReplayResult replay_log(const EventLog& recorded) {
  const auto& records = recorded.records();
  if (records.empty() || records.front().kind != EventKind::SessionStart) {
    throw ReplayError("log does not begin with a session_start record");
  }
  const auto& start = records.front().payload;

  std::shared_ptr<const ScenarioSpec> spec;
  SessionConfig config;
  Mode mode = Mode::Headless;
  PopulationSpec population;
  std::optional<AgentProfile> player;
  try {
    spec = std::make_shared<const ScenarioSpec>(parse_scenario(start.at("scenario_document").get<std::string>()));
    config.seed = start.at("seed").get<std::uint64_t>();
    config.tick_dt = start.at("tick_dt").get<double>();
    config.fire_enabled = start.at("fire_enabled").get<bool>();
    config.spread_interval = start.at("spread_interval").get<double>();
    config.time_cap = start.at("time_cap").get<double>();
    config.behavior.p_nearest_given_familiar = start.at("behavior").at("p_nearest_given_familiar").get<double>();
    config.behavior.p_retrace_given_unfamiliar = start.at("behavior").at("p_retrace_given_unfamiliar").get<double>();
    config.agent_profile.speed = start.at("agent_profile").at("speed").get<double>();
    config.agent_profile.stair_factor = start.at("agent_profile").at("stair_factor").get<double>();
    mode = start.at("mode").get<std::string>() == "interactive" ? Mode::Interactive : Mode::Headless;
    const auto& pop = start.at("population");
    population = {pop.at("familiar_gamers").get<int>(), pop.at("familiar_nongamers").get<int>(),
                  pop.at("unfamiliar_gamers").get<int>(), pop.at("unfamiliar_nongamers").get<int>()};
    if (!start.at("player").is_null()) {
      const auto& p = start.at("player").at("profile");
      player = AgentProfile{p.at("speed").get<double>(), p.at("familiar").get<bool>(), p.at("gamer").get<bool>(),
                            p.at("stair_factor").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ReplayError(std::string("malformed session_start record: ") + e.what());
  }

  std::vector<ScriptedInput> inputs;
  std::optional<std::uint64_t> end_tick;
  std::optional<double> recorded_score;
  for (const auto& e : records) {
    if (e.kind == EventKind::Input) {
      const auto key = e.payload.at("key").get<std::string>();
      const auto in = input_from_key(key);
      if (!in) throw ReplayError("unknown input key '" + key + "'");
      inputs.push_back({e.payload.at("tick").get<std::uint64_t>(), *in});
    } else if (e.kind == EventKind::SessionEnd) {
      end_tick = e.payload.at("tick").get<std::uint64_t>();
      if (e.payload.contains("score")) recorded_score = e.payload.at("score").get<double>();
    }
  }

  if (!end_tick) throw ReplayError("log has no session_end record");

  Session session(spec, config, mode, population, player);
  drive(session, inputs, end_tick);

  ReplayResult r;
  r.outcome = session.outcome();
  if (session.outcome() == Outcome::Escaped) r.score = session.score();
  r.recorded_score = recorded_score;
  const auto regenerated = session.log().serialize();
  const auto original = recorded.serialize();
  r.digest = digest_hex(regenerated);
  r.recorded_digest = digest_hex(original);
  r.identical = regenerated == original;
  return r;
}

// --- calibration -----------------------------------------------------------

double calibration_error(double game_time, double real_time) {
  if (!(real_time > 0.0)) throw std::domain_error("calibration_error: real_time must be positive");
  return 1.0 - game_time / real_time;
}

std::vector<CalibrationRecord> calibration_report(const ScenarioSpec& spec, const std::vector<PathDefinition>& paths,
                                                  const AgentProfile& profile, double tick_dt) {
  check(profile);
  std::vector<CalibrationRecord> out;
  out.reserve(paths.size());
  for (const auto& p : paths) {
    CalibrationRecord rec;
    rec.path_id = p.id;
    rec.distance = p.declared_length;
    rec.real_time = p.real_time.value_or(std::numeric_limits<double>::quiet_NaN());
    std::optional<Route> route;
    if (spec.grid.passable(p.from) && spec.grid.passable(p.to)) route = shortest_path(spec, p.from, p.to);
    if (!route) {
      rec.status = "disconnected";
    } else {
      rec.game_time = traverse_time(spec, *route, profile, tick_dt);
      if (p.real_time && *p.real_time > 0.0) {
        rec.error = calibration_error(rec.game_time, *p.real_time);
      } else {
        rec.status = "no_real_time";
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_calibration_csv(std::ostream& os, const std::vector<CalibrationRecord>& records) {
  os << "path,distance_m,real_time_s,subject_speed_mps,game_time_s,error_pct,status\n";
  for (const auto& r : records) {
    os << r.path_id << ',' << fixed(r.distance, 2) << ',' << fixed(r.real_time, 2) << ','
       << fixed(r.subject_speed(), 3) << ',' << fixed(r.game_time, 2) << ',' << fixed(r.error * 100.0, 2) << ','
       << r.status << '\n';
  }
}

// --- experiment ------------------------------------------------------------

double ContingencyTable::nearest_fraction(std::size_t row) const {
  const auto total = row_total(row);
  return total > 0 ? static_cast<double>(counts[row][kNearest]) / static_cast<double>(total) : 0.0;
}

void EscapeStats::add(const AgentOutcome& o) {
  ++agents;
  switch (o.outcome) {
    case AgentOutcomeKind::Escaped:
      ++escaped;
      sum += *o.escape_time;
      min = std::min(min, *o.escape_time);
      max = std::max(max, *o.escape_time);
      break;
    case AgentOutcomeKind::Trapped: ++trapped; break;
    case AgentOutcomeKind::Truncated: ++truncated; break;
  }
}

std::size_t category_index(bool familiar, bool gamer) { return (familiar ? 0U : 2U) + (gamer ? 0U : 1U); }

void tally(ExperimentReport& report, const std::vector<AgentOutcome>& agents) {
  for (const auto& a : agents) {
    const auto row = a.familiar ? ContingencyTable::kFamiliar : ContingencyTable::kUnfamiliar;
    const bool nearest = !a.initial_exit.empty() && a.initial_exit == a.nearest_exit;
    ++report.table.counts[row][nearest ? ContingencyTable::kNearest : ContingencyTable::kOther];
    report.categories[category_index(a.familiar, a.gamer)].add(a);
  }
}

std::uint64_t trial_seed(std::uint64_t master, long trial) {
  return splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(trial)));
}

ExperimentReport run_experiment(std::shared_ptr<const ScenarioSpec> spec, SessionConfig config,
                                const PopulationSpec& population, long trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("run_experiment: trials must be >= 1");
  ExperimentReport report;
  config.logging = false;
  for (long t = 0; t < trials; ++t) {
    config.seed = trial_seed(seed, t);
    Session session(spec, config, Mode::Headless, population);
    drive(session, {}, std::nullopt);
    tally(report, summarize(session).agents);
    ++report.trials;
  }
  return report;
}

void write_experiment_csv(std::ostream& os, const ExperimentReport& report) {
  const auto& t = report.table;
  os << "familiarity,nearest_exit_chosen,other_exit_chosen,total,nearest_fraction\n";
  const char* rows[] = {"familiar", "unfamiliar"};
  for (std::size_t r = 0; r < 2; ++r) {
    os << rows[r] << ',' << t.counts[r][ContingencyTable::kNearest] << ',' << t.counts[r][ContingencyTable::kOther]
       << ',' << t.row_total(r) << ',' << fixed(t.nearest_fraction(r), 4) << '\n';
  }
  os << '\n';
  os << "category,agents,escaped,trapped,truncated,mean_escape_s,min_escape_s,max_escape_s\n";
  const char* names[] = {"familiar_gamer", "familiar_nongamer", "unfamiliar_gamer", "unfamiliar_nongamer"};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& s = report.categories[i];
    const bool any = s.escaped > 0;
    os << names[i] << ',' << s.agents << ',' << s.escaped << ',' << s.trapped << ',' << s.truncated << ','
       << (any ? fixed(s.mean(), 2) : "") << ',' << (any ? fixed(s.min, 2) : "") << ','
       << (any ? fixed(s.max, 2) : "") << '\n';
  }
}

void write_run_csv(std::ostream& os, const SessionResult& result) {
  os << "agent,familiar,gamer,intent,outcome,exit,escape_time_s,initial_exit,nearest_exit\n";
  for (const auto& a : result.agents) {
    os << a.id << ',' << (a.familiar ? "yes" : "no") << ',' << (a.gamer ? "yes" : "no") << ',' << to_string(a.intent)
       << ',' << to_string(a.outcome) << ',' << a.exit << ',' << (a.escape_time ? fixed(*a.escape_time, 2) : "")
       << ',' << a.initial_exit << ',' << a.nearest_exit << '\n';
  }
}

}  // namespace evac
