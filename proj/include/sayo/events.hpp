#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace sayo {

enum class EventKind {
  add_asset,
  remove_asset,
  set_weight,
  set_correlation,
  set_alpha,
  set_horizon,
  set_sample_count,
  attach_history,
};

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& name);

// Wire form: {"seq": n, "kind": "AddAsset", "payload": {...}, "user_time_ms": t}.
struct SessionEvent {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::add_asset;
  nlohmann::json payload = nlohmann::json::object();
  // Time the user spent supplying this event (pt_i); 0 when unknown.
  double user_time_ms = 0.0;
};

nlohmann::json to_json(const SessionEvent& e);
SessionEvent event_from_json(const nlohmann::json& j);

// JSON-lines; blank lines and lines starting with '#' are skipped.
std::vector<SessionEvent> read_script(std::istream& in);
void write_script(std::ostream& out, const std::vector<SessionEvent>& events);

}  // namespace sayo
