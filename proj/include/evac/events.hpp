#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace evac {

enum class EventKind : std::uint8_t {
  SessionStart,
  Input,
  Alarm,
  Ignition,
  FireSpread,
  AgentMove,
  AgentEscaped,
  AgentTrapped,
  PlayerEscaped,
  SessionEnd,
};

std::string_view to_string(EventKind k);
std::optional<EventKind> event_kind_from_string(std::string_view s);

struct EventRecord {
  double t{0.0};
  EventKind kind{EventKind::SessionStart};
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// One line of the persisted log: {"kind":...,"payload":{...},"t":...}.
/// Keys are sorted, so equal records serialize to equal bytes.
std::string to_line(const EventRecord& e);
EventRecord parse_event_line(std::string_view line);

/// Append-only, timestamps non-decreasing.
class EventLog {
 public:
  void append(double t, EventKind kind, nlohmann::json payload = nlohmann::json::object());

  const std::vector<EventRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  /// Newline-terminated lines; the canonical persisted form.
  std::string serialize() const;
  static EventLog parse(std::string_view text);

 private:
  std::vector<EventRecord> records_;
};

/// FNV-1a 64-bit over the bytes, as 16 lowercase hex digits.
std::string digest_hex(std::string_view bytes);

}  // namespace evac
