#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "evac/harness.hpp"
#include "evac/scenario.hpp"
#include "evac/server/server.hpp"

#ifndef EVAC_DEFAULT_SCENARIO_DIR
#define EVAC_DEFAULT_SCENARIO_DIR "scenarios"
#endif

namespace {

constexpr int kOk = 0;
constexpr int kFindings = 1;
constexpr int kUsage = 2;

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string number(double v) { return nlohmann::json(v).dump(); }

struct PopulationFlags {
  evac::PopulationSpec population = evac::PopulationSpec::subject_sample();

  void add(CLI::App* cmd) {
    cmd->add_option("--familiar-gamers", population.familiar_gamers)->check(CLI::NonNegativeNumber);
    cmd->add_option("--familiar-nongamers", population.familiar_nongamers)->check(CLI::NonNegativeNumber);
    cmd->add_option("--unfamiliar-gamers", population.unfamiliar_gamers)->check(CLI::NonNegativeNumber);
    cmd->add_option("--unfamiliar-nongamers", population.unfamiliar_nongamers)->check(CLI::NonNegativeNumber);
  }
};

// Loads a scenario for the commands that need a valid one; nullopt after
// printing the reason.
std::shared_ptr<const evac::ScenarioSpec> load(const std::string& path, int& status) {
  const auto text = read_file(path);
  if (!text) {
    std::cerr << "evacsim: cannot read " << path << '\n';
    status = kUsage;
    return nullptr;
  }
  try {
    return std::make_shared<const evac::ScenarioSpec>(evac::parse_scenario(*text));
  } catch (const evac::ScenarioSemanticError& e) {
    for (const auto& f : e.report().findings) std::cerr << path << ": " << evac::to_string(f) << '\n';
  } catch (const std::exception& e) {
    std::cerr << path << ": " << e.what() << '\n';
  }
  status = kFindings;
  return nullptr;
}

int cmd_validate(const std::string& path) {
  const auto text = read_file(path);
  if (!text) {
    std::cerr << "evacsim: cannot read " << path << '\n';
    return kUsage;
  }
  evac::ValidationReport report;
  try {
    report = evac::validate(evac::parse_scenario_unchecked(*text));
  } catch (const evac::ScenarioSyntaxError& e) {
    std::cout << path << ": error: " << e.what() << '\n';
    return kFindings;
  }
  if (report.ok()) {
    std::cout << "OK\n";
    return kOk;
  }
  for (const auto& f : report.findings) std::cout << path << ": " << evac::to_string(f) << '\n';
  return kFindings;
}

int cmd_calibrate(const std::string& path, const evac::AgentProfile& profile, double tick) {
  int status = kOk;
  const auto spec = load(path, status);
  if (!spec) return status;
  if (spec->calibration_paths.empty()) std::cerr << "warning: " << path << " declares no calibration paths\n";
  evac::write_calibration_csv(std::cout, evac::calibration_report(*spec, spec->calibration_paths, profile, tick));
  return kOk;
}

int cmd_experiment(const std::string& path, const evac::SessionConfig& config, const evac::PopulationSpec& population,
                   long trials, std::uint64_t seed) {
  int status = kOk;
  const auto spec = load(path, status);
  if (!spec) return status;
  evac::write_experiment_csv(std::cout, evac::run_experiment(spec, config, population, trials, seed));
  return kOk;
}

int cmd_run_path(const evac::ScenarioSpec& spec, const std::string& path_id, const evac::AgentProfile& profile,
                 double tick) {
  const auto* p = spec.find_path(path_id);
  if (!p) {
    std::cerr << "evacsim: no path '" << path_id << "' in " << spec.name << '\n';
    return kFindings;
  }
  const auto route = evac::shortest_path(spec, p->from, p->to);
  if (!route) {
    std::cerr << "evacsim: path " << path_id << " is disconnected\n";
    return kFindings;
  }
  std::cout << "path: " << path_id << '\n'
            << "distance_m: " << number(route->length) << '\n'
            << "escape_time_s: " << number(evac::traverse_time(spec, *route, profile, tick)) << '\n';
  return kOk;
}

int cmd_run(const std::string& path, const evac::SessionConfig& config, const evac::PopulationSpec& population,
            const std::string& path_id, const std::string& log_path) {
  int status = kOk;
  const auto spec = load(path, status);
  if (!spec) return status;
  if (!path_id.empty()) return cmd_run_path(*spec, path_id, config.agent_profile, config.tick_dt);

  const auto result = evac::run_headless(spec, config, population);
  std::cout << "outcome: " << evac::to_string(result.outcome) << '\n'
            << "truncated: " << (result.truncated ? "yes" : "no") << '\n'
            << "ticks: " << result.ticks << '\n'
            << "digest: " << result.digest << "\n\n";
  evac::write_run_csv(std::cout, result);
  if (!log_path.empty()) {
    std::ofstream out(log_path, std::ios::binary | std::ios::trunc);
    out << result.log.serialize();
    if (!out) {
      std::cerr << "evacsim: cannot write " << log_path << '\n';
      return kFindings;
    }
  }
  return kOk;
}

int cmd_replay(const std::string& path) {
  const auto text = read_file(path);
  if (!text) {
    std::cerr << "evacsim: cannot read " << path << '\n';
    return kUsage;
  }
  evac::ReplayResult r;
  try {
    r = evac::replay_log(evac::EventLog::parse(*text));
  } catch (const std::exception& e) {
    std::cerr << path << ": " << e.what() << '\n';
    return kFindings;
  }
  std::cout << "outcome: " << evac::to_string(r.outcome) << '\n';
  std::cout << "score: " << (r.score ? number(*r.score) : "none") << '\n';
  std::cout << "recorded_score: " << (r.recorded_score ? number(*r.recorded_score) : "none") << '\n';
  std::cout << "digest: " << r.digest << '\n';
  std::cout << "identical: " << (r.identical ? "yes" : "no") << '\n';
  return r.identical ? kOk : kFindings;
}

struct ServeFlags {
  std::string bind{"127.0.0.1:8080"};
  std::string data;
  std::string scenarios;
  std::string web;
  double tick_rate{10.0};
  unsigned stride{1};
};

int cmd_serve(const ServeFlags& f) {
  evac::server::ServerOptions options;
  auto host = f.bind;
  if (const auto colon = host.rfind(':'); colon != std::string::npos) {
    try {
      const auto port = std::stoul(host.substr(colon + 1));
      if (port > 65535) throw std::out_of_range("port");
      options.port = static_cast<std::uint16_t>(port);
    } catch (const std::exception&) {
      std::cerr << "evacsim: bad --bind value '" << f.bind << "'\n";
      return kUsage;
    }
    host.resize(colon);
  }
  options.bind_address = host.empty() ? "0.0.0.0" : host;
  if (!f.data.empty()) {
    options.data_dir = f.data;
  } else if (const char* env = std::getenv("EVAC_DATA_DIR"); env && *env) {
    options.data_dir = env;
  }
  if (!f.web.empty()) options.web_dir = f.web;
  options.tick_period = std::chrono::milliseconds(static_cast<long>(1000.0 / f.tick_rate));
  options.host.state_stride = f.stride;

  std::string scenario_dir = f.scenarios;
  if (scenario_dir.empty()) {
    const char* env = std::getenv("EVAC_SCENARIO_DIR");
    scenario_dir = env && *env ? env : EVAC_DEFAULT_SCENARIO_DIR;
  }
  evac::server::ScenarioCatalog catalog;
  for (const auto& err : catalog.load_directory(scenario_dir)) std::cerr << "warning: " << err << '\n';
  if (catalog.ids().empty()) {
    std::cerr << "evacsim: no scenarios loaded from " << scenario_dir << '\n';
    return kFindings;
  }

  // Block the shutdown signals before the I/O thread starts so only this
  // thread receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  evac::server::Server server(std::move(catalog), options);
  try {
    server.start();
  } catch (const std::exception& e) {
    std::cerr << "evacsim: cannot listen on " << f.bind << ": " << e.what() << '\n';
    return kFindings;
  }
  std::cout << "listening on http://" << options.bind_address << ':' << server.port() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evacuation game simulator"};
  app.require_subcommand(1);

  std::string file;
  double tick = 0.1;
  evac::AgentProfile profile;
  evac::SessionConfig config;
  PopulationFlags population;
  long trials = 1000;
  std::uint64_t seed = 0;
  std::string path_id;
  std::string log_path;
  ServeFlags serve;

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("file", file)->required();

  auto* calibrate = app.add_subcommand("calibrate", "Report calibration paths as CSV");
  calibrate->add_option("file", file)->required();
  calibrate->add_option("--speed", profile.speed, "walking speed, m/s")->check(CLI::PositiveNumber);
  calibrate->add_option("--stair-factor", profile.stair_factor)->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--tick", tick, "tick length, s")->check(CLI::PositiveNumber);

  auto* experiment = app.add_subcommand("experiment", "Run headless trials and tabulate exit choices");
  experiment->add_option("file", file)->required();
  experiment->add_option("--trials", trials)->check(CLI::PositiveNumber);
  experiment->add_option("--seed", seed);
  population.add(experiment);
  experiment->add_option("--p-nearest-familiar", config.behavior.p_nearest_given_familiar)->check(CLI::Range(0.0, 1.0));
  experiment->add_option("--p-retrace-unfamiliar", config.behavior.p_retrace_given_unfamiliar)
      ->check(CLI::Range(0.0, 1.0));
  experiment->add_flag("--no-fire", [&](std::int64_t) { config.fire_enabled = false; });

  auto* run = app.add_subcommand("run", "Run one headless session");
  run->add_option("file", file)->required();
  run->add_option("--seed", config.seed);
  run->add_option("--time-cap", config.time_cap)->check(CLI::PositiveNumber);
  run->add_flag("--no-fire", [&](std::int64_t) { config.fire_enabled = false; });
  run->add_option("--path", path_id, "time a single agent along a calibration path");
  run->add_option("--log", log_path, "write the event log here");
  population.add(run);

  auto* replay = app.add_subcommand("replay", "Re-run a recorded session log");
  replay->add_option("log", file)->required();

  auto* serve_cmd = app.add_subcommand("serve", "Serve the game over HTTP and WebSocket");
  serve_cmd->add_option("--bind", serve.bind, "ADDR[:PORT]");
  serve_cmd->add_option("--data", serve.data, "session store directory (env EVAC_DATA_DIR)");
  serve_cmd->add_option("--scenarios", serve.scenarios, "scenario directory (env EVAC_SCENARIO_DIR)");
  serve_cmd->add_option("--web", serve.web, "static client directory");
  serve_cmd->add_option("--tick-rate", serve.tick_rate, "ticks per second")->check(CLI::Range(1.0, 100.0));
  serve_cmd->add_option("--stride", serve.stride, "ticks per state message")->check(CLI::Range(1U, 1000U));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "evacsim: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*validate) return cmd_validate(file);
    if (*calibrate) return cmd_calibrate(file, profile, tick);
    if (*experiment) return cmd_experiment(file, config, population.population, trials, seed);
    if (*run) return cmd_run(file, config, population.population, path_id, log_path);
    if (*replay) return cmd_replay(file);
    if (*serve_cmd) return cmd_serve(serve);
  } catch (const std::exception& e) {
    std::cerr << "evacsim: " << e.what() << '\n';
    return kFindings;
  }
  return kUsage;
}
