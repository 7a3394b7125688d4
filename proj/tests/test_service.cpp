#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "scripts.hpp"
#include "sayo/service.hpp"
// After Eigen: <resolv.h> defines a _res macro that clashes with Eigen internals.
#include "httplib.h"

using namespace sayo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Running {
  explicit Running(ServiceOptions o = {}) : service(std::move(o)) {
    port = service.start("127.0.0.1", 0);
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30, 0);
    return c;
  }
  HttpService service;
  int port = 0;
};

std::string create(httplib::Client& c, const json& config = json::object()) {
  const auto res = c.Post("/sessions", config.dump(), "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 201);
  return json::parse(res->body)["session"];
}

httplib::Result post_event(httplib::Client& c, const std::string& id, const SessionEvent& e) {
  return c.Post("/sessions/" + id + "/events", to_json(e).dump(), "application/json");
}

struct Frame {
  std::size_t id;
  std::string event;
  json data;
};

std::vector<Frame> parse_frames(const std::string& text) {
  std::vector<Frame> out;
  std::istringstream in(text);
  std::string line;
  Frame f{};
  while (std::getline(in, line)) {
    if (line.rfind("id: ", 0) == 0) f.id = std::stoul(line.substr(4));
    else if (line.rfind("event: ", 0) == 0) f.event = line.substr(7);
    else if (line.rfind("data: ", 0) == 0) f.data = json::parse(line.substr(6));
    else if (line.empty() && !f.event.empty()) {
      out.push_back(f);
      f = Frame{};
    }
  }
  return out;
}

void strip_timestamps(json& j) {
  if (j.is_object()) {
    j.erase("computed_at");
    for (auto& [k, v] : j.items()) strip_timestamps(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_timestamps(v);
  }
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SAYO_CLI) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sayo_test_service_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_script_file(const fs::path& p, const std::vector<SessionEvent>& events) {
  std::ofstream out(p);
  write_script(out, events);
}

}  // namespace

TEST_CASE("session endpoints and error statuses") {
  Running r;
  auto c = r.client();
  REQUIRE(c.Get("/health")->status == 200);

  const auto bad = c.Post("/sessions", R"({"alpha": 1.5})", "application/json");
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body)["error"]["code"] == "parameter");
  CHECK(c.Post("/sessions", "{not json", "application/json")->status == 400);

  const std::string id = create(c, {{"n", 20000}, {"seed", 3}});
  CHECK(id == "s1");

  const auto accepted = post_event(c, id, scripts::add(1, "a", scripts::normal(0, 1)));
  REQUIRE(accepted->status == 202);
  CHECK(json::parse(accepted->body)["seq"] == 1);

  const auto stale = post_event(c, id, scripts::add(1, "b", scripts::normal(0, 1)));
  CHECK(stale->status == 409);
  CHECK(json::parse(stale->body)["error"]["code"] == "sequence");
  CHECK(c.Post("/sessions/" + id + "/events", R"({"seq": 2, "kind": "Teleport", "payload": {}})",
               "application/json")->status == 400);
  CHECK(c.Post("/sessions/" + id + "/events", "[1, 2", "application/json")->status == 400);
  CHECK(post_event(c, "nope", scripts::add(1, "a", scripts::normal(0, 1)))->status == 404);
  CHECK(c.Get("/sessions/nope")->status == 404);
  CHECK(c.Get("/sessions/nope/stream")->status == 404);

  r.service.sessions().find(id)->wait_idle();
  const json snap = json::parse(c.Get("/sessions/" + id)->body);
  for (const char* key : {"session", "head", "portfolio", "risk", "sensitivity", "timing"}) CHECK(snap.contains(key));
  CHECK(snap["head"] == 1);
  CHECK(std::abs(snap["risk"]["portfolio"]["var"].get<double>() - 1.6449) < 0.05);
  CHECK(json::parse(c.Get("/sessions/" + id + "/snapshot")->body)["session"] == id);

  const auto csv = c.Get("/sessions/" + id + "/ledger");
  CHECK(csv->body.rfind("seq,pt_ms,gt_ms,st_ms,ot_ms\n1,", 0) == 0);
  CHECK(json::parse(c.Get("/sessions/" + id + "/ledger?format=json")->body)["events"] == 1);
  CHECK(json::parse(c.Get("/sessions")->body)["sessions"].size() == 1);
}

TEST_CASE("update stream delivers the risk report of a new asset") {
  Running r;
  auto c = r.client();
  const std::string id = create(c, {{"n", 20000}});

  std::string received;
  std::thread reader([&] {
    auto sc = r.client();
    sc.Get("/sessions/" + id + "/stream", [&](const char* data, std::size_t len) {
      received.append(data, len);
      return received.find("event: timing") == std::string::npos;
    });
  });
  REQUIRE(post_event(c, id, scripts::add(1, "a", scripts::normal(0, 2)))->status == 202);
  reader.join();

  const auto frames = parse_frames(received);
  REQUIRE(frames.size() >= 2);
  CHECK(frames[0].event == "risk");
  CHECK(frames[0].id == 0);
  CHECK(frames[0].data["seq"] == 1);
  CHECK(frames[0].data["kind"] == "risk");
  CHECK(std::abs(frames[0].data["body"]["nodes"]["a"]["var"].get<double>() - 2 * 1.6449) < 0.1);

  // Replay from an offset without following.
  post_event(c, id, scripts::add(2, "b", scripts::normal(0, 1)));
  post_event(c, id, scripts::reweight(3, "zzz", 1));
  r.service.sessions().find(id)->wait_idle();
  const auto tail = parse_frames(c.Get("/sessions/" + id + "/stream?from=1&follow=0")->body);
  REQUIRE(!tail.empty());
  CHECK(tail.front().id == 1);
  std::map<std::uint64_t, int> primary;
  for (const auto& f : tail)
    if (f.event == "risk" || f.event == "error") ++primary[f.data["seq"].get<std::uint64_t>()];
  CHECK(primary[2] == 1);
  CHECK(primary[3] == 1);
  CHECK(tail.back().event == "error");
  CHECK(tail.back().data["body"]["code"] == "not_found");

  httplib::Headers resume{{"Last-Event-ID", std::to_string(tail.back().id - 1)}};
  const auto resumed = parse_frames(c.Get("/sessions/" + id + "/stream?follow=0", resume)->body);
  REQUIRE(resumed.size() == 1);
  CHECK(resumed[0].event == "error");
}

TEST_CASE("cli run writes the report files") {
  const fs::path dir = scratch("cli");
  std::mt19937_64 rng(5);
  write_script_file(dir / "demo.jsonl", scripts::random_script(rng, 12, true));
  REQUIRE(run_cli("run " + (dir / "demo.jsonl").string() + " --out " + (dir / "out").string() +
                  " --samples 5000") == 0);
  for (const char* f : {"risk.json", "sensitivity.json", "timing.csv"}) CHECK(fs::exists(dir / "out" / f));
  std::ifstream csv(dir / "out" / "timing.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "seq,pt_ms,gt_ms,st_ms,ot_ms");

  const std::string missing = (dir / "absent.jsonl").string();
  const std::string cmd = std::string(SAYO_CLI) + " run " + missing + " 2>&1";
  std::string output;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  char buf[256];
  while (fgets(buf, sizeof buf, pipe)) output += buf;
  const int rc = pclose(pipe);
  CHECK(WEXITSTATUS(rc) != 0);
  CHECK(output.find(missing) != std::string::npos);

  std::ofstream(dir / "bad.jsonl") << R"({"seq": 1, "kind": "SetWeight", "payload": {"asset_id": "x", "weight": 1}})" << "\n";
  CHECK(run_cli("run " + (dir / "bad.jsonl").string() + " --out " + (dir / "bad").string()) != 0);
}

TEST_CASE("cli runs are reproducible") {
  const fs::path dir = scratch("repro");
  std::mt19937_64 rng(9);
  write_script_file(dir / "s.jsonl", scripts::random_script(rng, 15, true));
  for (const char* out : {"one", "two"})
    REQUIRE(run_cli("--script " + (dir / "s.jsonl").string() + " --out " + (dir / out).string() +
                    " --seed 42 --samples 4000") == 0);
  for (const char* f : {"risk.json", "sensitivity.json"}) {
    json a = read_json(dir / "one" / f), b = read_json(dir / "two" / f);
    strip_timestamps(a);
    strip_timestamps(b);
    CHECK(a.dump() == b.dump());
  }
  REQUIRE(run_cli("--script " + (dir / "s.jsonl").string() + " --out " + (dir / "three").string() +
                  " --seed 43 --samples 4000") == 0);
  json a = read_json(dir / "one" / "risk.json"), c = read_json(dir / "three" / "risk.json");
  strip_timestamps(a);
  strip_timestamps(c);
  CHECK(a.dump() != c.dump());
}

TEST_CASE("cli and endpoints agree on a 20-event script") {
  const fs::path dir = scratch("transport");
  std::mt19937_64 rng(21);
  const auto events = scripts::random_script(rng, 20, true);
  write_script_file(dir / "s.jsonl", events);
  REQUIRE(run_cli("run " + (dir / "s.jsonl").string() + " --out " + dir.string() + " --seed 11 --samples 5000") == 0);
  json via_cli = read_json(dir / "snapshot.json");

  Running r;
  auto c = r.client();
  const std::string id = create(c, {{"seed", 11}, {"n", 5000}});
  for (const auto& e : events) REQUIRE(post_event(c, id, e)->status == 202);
  r.service.sessions().find(id)->wait_idle();
  json via_http = json::parse(c.Get("/sessions/" + id)->body);

  strip_timestamps(via_cli);
  strip_timestamps(via_http);
  CHECK(via_cli["head"] == 20);
  CHECK(via_http["head"] == 20);
  for (const char* key : {"portfolio", "risk", "sensitivity"}) CHECK(via_cli[key].dump() == via_http[key].dump());
  CHECK(via_cli["timing"]["events"] == via_http["timing"]["events"]);
}

TEST_CASE("event intake latency does not depend on N") {
  auto p99 = [](Eigen::Index n) {
    Running r;
    auto c = r.client();
    const std::string id = create(c, {{"n", n}, {"sensitivity", false}});
    std::vector<double> us;
    REQUIRE(post_event(c, id, scripts::add(1, "a", scripts::normal(0, 1)))->status == 202);
    REQUIRE(post_event(c, id, scripts::add(2, "b", scripts::normal(0, 1)))->status == 202);
    for (std::uint64_t s = 3; s < 203; ++s) {
      const auto t0 = std::chrono::steady_clock::now();
      REQUIRE(post_event(c, id, scripts::reweight(s, s % 2 ? "a" : "b", 0.5 + 0.01 * s))->status == 202);
      us.push_back(std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(us.begin(), us.end());
    return us[us.size() * 99 / 100];
  };
  const double small = p99(1000), large = p99(1000000);
  MESSAGE("p99 intake latency: N=1e3 " << small << " us, N=1e6 " << large << " us");
  CHECK(large <= 2.0 * small);
}
