#include "evac/server/store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace evac::server {

namespace fs = std::filesystem;

namespace {

std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError("cannot write " + p.string());
  out << content;
  out.flush();
  if (!out) throw StoreError("short write to " + p.string());
}

}  // namespace

std::vector<std::string> ScenarioCatalog::load_directory(const fs::path& dir) {
  std::vector<std::string> errors;
  std::error_code ec;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".scn") files.push_back(entry.path());
  }
  if (ec) errors.push_back(dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      add(read_file(f).value_or(""));
    } catch (const std::exception& e) {
      errors.push_back(f.string() + ": " + e.what());
    }
  }
  return errors;
}

void ScenarioCatalog::add(std::string document) {
  auto spec = std::make_shared<const ScenarioSpec>(parse_scenario(document));
  const auto id = spec->name;
  entries_[id] = Entry{std::move(spec), std::move(document)};
}

std::shared_ptr<const ScenarioSpec> ScenarioCatalog::find(const std::string& id) const {
  const auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : it->second.spec;
}

const std::string* ScenarioCatalog::document(const std::string& id) const {
  const auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second.document;
}

std::vector<std::string> ScenarioCatalog::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : entries_) out.push_back(id);
  return out;
}

nlohmann::json to_json(const SessionSummary& s) {
  return {{"session_id", s.session_id},
          {"scenario", s.scenario},
          {"familiar", s.familiar},
          {"gamer", s.gamer},
          {"outcome", s.outcome},
          {"score", s.score ? nlohmann::json(*s.score) : nlohmann::json(nullptr)},
          {"exit", s.exit.empty() ? nlohmann::json(nullptr) : nlohmann::json(s.exit)},
          {"nearest_exit", s.nearest_exit},
          {"nearest_chosen", s.nearest_chosen()},
          {"seed", s.seed},
          {"started_at", s.started_at},
          {"event_digest", s.event_digest}};
}

SessionSummary summary_from_json(const nlohmann::json& j) {
  SessionSummary s;
  s.session_id = j.at("session_id").get<std::string>();
  s.scenario = j.at("scenario").get<std::string>();
  s.familiar = j.at("familiar").get<bool>();
  s.gamer = j.at("gamer").get<bool>();
  s.outcome = j.at("outcome").get<std::string>();
  if (!j.at("score").is_null()) s.score = j.at("score").get<double>();
  if (!j.at("exit").is_null()) s.exit = j.at("exit").get<std::string>();
  s.nearest_exit = j.at("nearest_exit").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.started_at = j.at("started_at").get<std::string>();
  s.event_digest = j.at("event_digest").get<std::string>();
  return s;
}

bool valid_session_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_';
  });
}

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {}

void SessionStore::persist(const SessionSummary& summary, const EventLog& log) {
  if (!valid_session_id(summary.session_id)) throw StoreError("invalid session id '" + summary.session_id + "'");
  std::lock_guard lock(mutex_);
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw StoreError("cannot create " + root_.string() + ": " + ec.message());

  // Written under a staging name, then renamed: a session directory is
  // either absent or complete.
  const auto staging = root_ / (".staging-" + summary.session_id);
  const auto final_dir = root_ / summary.session_id;
  if (fs::exists(final_dir)) throw StoreError("session '" + summary.session_id + "' already stored");
  fs::remove_all(staging, ec);
  fs::create_directory(staging, ec);
  if (ec) throw StoreError("cannot create " + staging.string() + ": " + ec.message());
  try {
    write_file(staging / "events.log", log.serialize());
    write_file(staging / "summary.json", to_json(summary).dump(2) + "\n");
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
  fs::rename(staging, final_dir, ec);
  if (ec) {
    fs::remove_all(staging, ec);
    throw StoreError("cannot finalize session '" + summary.session_id + "'");
  }
}

std::optional<SessionSummary> SessionStore::load_summary(const std::string& session_id) const {
  if (!valid_session_id(session_id)) return std::nullopt;
  const auto text = read_file(root_ / session_id / "summary.json");
  if (!text) return std::nullopt;
  try {
    return summary_from_json(nlohmann::json::parse(*text));
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

std::optional<std::string> SessionStore::load_log(const std::string& session_id) const {
  if (!valid_session_id(session_id)) return std::nullopt;
  return read_file(root_ / session_id / "events.log");
}

std::vector<SessionSummary> SessionStore::list() const {
  std::vector<SessionSummary> out;
  std::error_code ec;
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root_, ec)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && valid_session_id(name)) ids.push_back(name);
  }
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) {
    if (auto s = load_summary(id)) out.push_back(std::move(*s));
  }
  return out;
}

ContingencyTable SessionStore::aggregate() const {
  ContingencyTable t;
  for (const auto& s : list()) {
    const auto row = s.familiar ? ContingencyTable::kFamiliar : ContingencyTable::kUnfamiliar;
    ++t.counts[row][s.nearest_chosen() ? ContingencyTable::kNearest : ContingencyTable::kOther];
  }
  return t;
}

}  // namespace evac::server
