#include "sayo/events.hpp"

#include <array>
#include <utility>

#include "sayo/error.hpp"

namespace sayo {

namespace {
constexpr std::array<std::pair<EventKind, const char*>, 8> kNames{{
    {EventKind::add_asset, "AddAsset"},
    {EventKind::remove_asset, "RemoveAsset"},
    {EventKind::set_weight, "SetWeight"},
    {EventKind::set_correlation, "SetCorrelation"},
    {EventKind::set_alpha, "SetAlpha"},
    {EventKind::set_horizon, "SetHorizon"},
    {EventKind::set_sample_count, "SetSampleCount"},
    {EventKind::attach_history, "AttachHistory"},
}};
}  // namespace

std::string to_string(EventKind kind) {
  for (const auto& [k, name] : kNames)
    if (k == kind) return name;
  return "Unknown";
}

EventKind event_kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kNames)
    if (name == n) return k;
  fail(ErrorCode::parse, "unknown event kind '" + name + "'");
}

nlohmann::json to_json(const SessionEvent& e) {
  nlohmann::json j{{"seq", e.seq}, {"kind", to_string(e.kind)}, {"payload", e.payload}};
  if (e.user_time_ms > 0.0) j["user_time_ms"] = e.user_time_ms;
  return j;
}

SessionEvent event_from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::parse, "event must be a JSON object");
  SessionEvent e;
  const auto seq = j.find("seq");
  require(seq != j.end() && seq->is_number_unsigned(), ErrorCode::parse, "event needs a non-negative integer 'seq'");
  e.seq = seq->get<std::uint64_t>();
  const auto kind = j.find("kind");
  require(kind != j.end() && kind->is_string(), ErrorCode::parse, "event needs a string 'kind'");
  e.kind = event_kind_from_string(kind->get<std::string>());
  if (const auto p = j.find("payload"); p != j.end()) {
    require(p->is_object(), ErrorCode::parse, "event 'payload' must be an object");
    e.payload = *p;
  }
  if (const auto t = j.find("user_time_ms"); t != j.end()) {
    require(t->is_number() && t->get<double>() >= 0.0, ErrorCode::parse, "'user_time_ms' must be >= 0");
    e.user_time_ms = t->get<double>();
  }
  return e;
}

std::vector<SessionEvent> read_script(std::istream& in) {
  std::vector<SessionEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      events.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse, "script line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorCode::parse, "script line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return events;
}

void write_script(std::ostream& out, const std::vector<SessionEvent>& events) {
  for (const auto& e : events) out << to_json(e).dump() << '\n';
}

}  // namespace sayo
