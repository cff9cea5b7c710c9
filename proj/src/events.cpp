#include "evac/events.hpp"

#include <array>
#include <cstdio>
#include <stdexcept>

namespace evac {

namespace {

constexpr std::array<std::string_view, 10> kKindNames{
    "session_start", "input",         "alarm",         "ignition",       "fire_spread",
    "agent_move",    "agent_escaped", "agent_trapped", "player_escaped", "session_end",
};

}  // namespace

std::string_view to_string(EventKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == s) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

std::string to_line(const EventRecord& e) {
  nlohmann::json j;
  j["t"] = e.t;
  j["kind"] = std::string(to_string(e.kind));
  j["payload"] = e.payload;
  return j.dump();
}

EventRecord parse_event_line(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  const auto kind = event_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw std::runtime_error("unknown event kind '" + j.at("kind").get<std::string>() + "'");
  return {j.at("t").get<double>(), *kind, j.at("payload")};
}

void EventLog::append(double t, EventKind kind, nlohmann::json payload) {
  if (!records_.empty() && t < records_.back().t) throw std::logic_error("event log timestamps must not decrease");
  records_.push_back({t, kind, std::move(payload)});
}

std::string EventLog::serialize() const {
  std::string out;
  for (const auto& e : records_) {
    out += to_line(e);
    out += '\n';
  }
  return out;
}

EventLog EventLog::parse(std::string_view text) {
  EventLog log;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    if (!line.empty()) {
      auto e = parse_event_line(line);
      log.append(e.t, e.kind, std::move(e.payload));
    }
    start = end + 1;
  }
  return log;
}

std::string digest_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace evac
