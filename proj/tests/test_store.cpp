#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "doctest.h"
#include "sayo/error.hpp"
#include "sayo/events.hpp"
#include "sayo/json_io.hpp"
#include "sayo/store.hpp"

using namespace sayo;
namespace fs = std::filesystem;

namespace {

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("sayo-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::io;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return out;
}

AssetRecord record(const std::string& id, MarginalDistribution d) { return AssetRecord{id, id + " Inc", d, ""}; }

}  // namespace

TEST_CASE("iso8601") {
  CHECK(parse_iso8601("1970-01-01") == 0);
  CHECK(parse_iso8601("1970-01-02T00:00:00Z") == 86'400'000);
  CHECK(parse_iso8601("2024-02-29 12:30") == parse_iso8601("2024-02-29T12:30:00.000Z"));
  CHECK(parse_iso8601("2024-03-01T01:00:00+01:00") == parse_iso8601("2024-03-01T00:00:00Z"));
  CHECK(parse_iso8601("2024-03-01T00:00:00.25Z").value() % 1000 == 250);
  CHECK_FALSE(parse_iso8601("2023-02-29"));
  CHECK_FALSE(parse_iso8601("2024-13-01"));
  CHECK_FALSE(parse_iso8601("yesterday"));
  CHECK_FALSE(parse_iso8601("2024-01-01T25:00"));
  CHECK(format_iso8601(*parse_iso8601("2021-07-04T05:06:07.089Z")) == "2021-07-04T05:06:07.089Z");
}

TEST_CASE("put and get") {
  AssetStore store;
  store.put_asset(record("ibm", dist::Normal{0.01, 0.02}));
  const AssetRecord got = store.get_asset("ibm");
  CHECK(got.source == AssetSource{dist::Normal{0.01, 0.02}});
  CHECK_FALSE(got.updated_at.empty());
  CHECK(code_of([&] { store.get_asset("nope"); }) == ErrorCode::not_found);

  store.put_asset(record("ibm", dist::Uniform{-1, 1}));
  CHECK(store.asset_ids() == std::vector<std::string>{"ibm"});
  CHECK(store.get_asset("ibm").source == AssetSource{dist::Uniform{-1, 1}});

  AssetRecord bad = record("x", dist::Normal{0, -1});
  CHECK(code_of([&] { store.put_asset(bad); }) == ErrorCode::parameter);
}

TEST_CASE("price CSV ingestion") {
  AssetStore store;
  std::istringstream ok("timestamp,price\n2024-01-01,10\n2024-01-02,10.5\n2024-01-03T00:00:00Z,11.25\n");
  const PriceHistory h = store.ingest_prices(ok, "acme");
  CHECK(h.observations.size() == 3);
  CHECK(h.observations[2].price == 11.25);
  CHECK(store.get_history("acme") == h);

  auto error_text = [](const std::string& csv) {
    std::istringstream in(csv);
    try {
      parse_price_csv(in, "x");
    } catch (const Error& e) {
      return std::make_pair(e.code(), std::string(e.what()));
    }
    return std::make_pair(ErrorCode::io, std::string());
  };
  auto [code, msg] = error_text("timestamp,price\n2024-01-01,10\n2024-01-02,-1\n");
  CHECK(code == ErrorCode::parse);
  CHECK(msg.find("line 3") != std::string::npos);
  std::tie(code, msg) = error_text("timestamp,price\n2024-01-02,10\n2024-01-01,11\n");
  CHECK(code == ErrorCode::ordering);
  CHECK(msg.find("line 3") != std::string::npos);
  std::tie(code, msg) = error_text("time,price\n2024-01-01,10\n");
  CHECK(code == ErrorCode::parse);
  CHECK(msg.find("line 1") != std::string::npos);
  std::tie(code, msg) = error_text("timestamp,price\n2024-01-01,ten\n");
  CHECK(msg.find("line 2") != std::string::npos);
  std::tie(code, msg) = error_text("timestamp,price\nJan 1,10\n");
  CHECK(msg.find("line 2") != std::string::npos);
}

TEST_CASE("durability") {
  TempDir dir;
  const fs::path file = dir.path / "store.jsonl";
  {
    AssetStore store(file);
    store.put_asset(record("ibm", dist::Normal{0.01, 0.02}));
    store.put_asset(record("tri", dist::Triangular{-1, 0.25, 2}));
    store.put_asset(record("emp", make_empirical({0.3, -0.1, 0.2})));
    std::istringstream csv("timestamp,price\n2024-01-01,10\n2024-01-02,10.1\n");
    store.ingest_prices(csv, "acme");
    store.put_asset(AssetRecord{"acme", "Acme", HistoryRef{"acme"}, ""});
    store.put_asset(record("ibm", dist::Normal{0.0, 0.03}));
    store.export_to(dir.path / "first");
  }
  AssetStore reopened(file);
  CHECK(reopened.asset_ids() == std::vector<std::string>{"acme", "emp", "ibm", "tri"});
  CHECK(reopened.get_asset("ibm").source == AssetSource{dist::Normal{0.0, 0.03}});
  reopened.export_to(dir.path / "second");
  CHECK(read_tree(dir.path / "first") == read_tree(dir.path / "second"));

  reopened.compact();
  AssetStore compacted(file);
  compacted.export_to(dir.path / "third");
  CHECK(read_tree(dir.path / "first") == read_tree(dir.path / "third"));

  AssetStore imported;
  imported.import_from(dir.path / "first");
  imported.export_to(dir.path / "fourth");
  CHECK(read_tree(dir.path / "first") == read_tree(dir.path / "fourth"));
}

TEST_CASE("a million-row history round-trips") {
  TempDir dir;
  std::ostringstream csv;
  csv << "timestamp,price\n";
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> step(-0.01, 0.01);
  double price = 100.0;
  const std::int64_t start = *parse_iso8601("2020-01-01T00:00:00Z");
  for (int i = 0; i < 1'000'000; ++i) {
    csv << format_iso8601(start + std::int64_t{60'000} * i) << ',' << price << '\n';
    price *= 1.0 + step(rng);
  }
  const fs::path file = dir.path / "big.jsonl";
  PriceHistory original;
  {
    AssetStore store(file);
    std::istringstream in(csv.str());
    original = store.ingest_prices(in, "big");
  }
  CHECK(original.observations.size() == 1'000'000);
  AssetStore reopened(file);
  CHECK(reopened.get_history("big") == original);
  CHECK(canonical_dump(to_json(reopened.get_history("big"))) == canonical_dump(to_json(original)));
}

TEST_CASE("default store path") {
  ::setenv("SAYO_STORE", "/tmp/elsewhere.jsonl", 1);
  CHECK(AssetStore::default_path() == fs::path("/tmp/elsewhere.jsonl"));
  ::unsetenv("SAYO_STORE");
  CHECK(AssetStore::default_path() == fs::path("sayo-store.jsonl"));
}

TEST_CASE("tuple cache") {
  TupleCache cache(3 * 100 * sizeof(double) + 64);
  const TupleKey a{"a", 1, 100, 1, 7}, b{"b", 1, 100, 1, 7}, c{"c", 1, 100, 1, 7}, d{"d", 1, 100, 1, 7};
  CHECK(cache.fetch(a) == nullptr);
  auto va = std::make_shared<const Eigen::VectorXd>(Eigen::VectorXd::LinSpaced(100, 0, 1));
  cache.store(a, va);
  const auto hit = cache.fetch(a);
  REQUIRE(hit);
  CHECK(*hit == *va);
  CHECK(cache.hits() == 1);
  CHECK(cache.misses() == 1);

  cache.store(b, va);
  cache.store(c, va);
  (void)cache.fetch(a);  // a becomes most recent
  cache.store(d, va);    // evicts b
  CHECK(cache.fetch(b) == nullptr);
  CHECK(cache.fetch(a) != nullptr);
  CHECK(cache.entries() == 3);
  CHECK(cache.bytes() <= 3 * 100 * sizeof(double) + 64);

  TupleKey other = a;
  other.source_digest = 8;
  CHECK(cache.fetch(other) == nullptr);

  // Concurrent use.
  TupleCache shared(1 << 20);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 500; ++i) {
        const TupleKey k{"k" + std::to_string(i % 37), static_cast<std::uint64_t>(t % 2), 100, 1, 0};
        if (!shared.fetch(k)) shared.store(k, va);
      }
    });
  for (auto& th : threads) th.join();
  CHECK(shared.entries() <= 74);
}

TEST_CASE("event scripts") {
  const std::string text =
      "# demo\n"
      "{\"seq\":1,\"kind\":\"AddAsset\",\"payload\":{\"asset_id\":\"a\",\"distribution\":{\"family\":\"normal\",\"mu\":0,\"sigma\":1}}}\n"
      "\n"
      "{\"seq\":2,\"kind\":\"SetAlpha\",\"payload\":{\"alpha\":0.99},\"user_time_ms\":120}\n";
  std::istringstream in(text);
  const auto events = read_script(in);
  REQUIRE(events.size() == 2);
  CHECK(events[0].kind == EventKind::add_asset);
  CHECK(events[1].user_time_ms == 120);
  CHECK(to_json(events[1])["kind"] == "SetAlpha");

  std::ostringstream out;
  write_script(out, events);
  std::istringstream again(out.str());
  const auto reread = read_script(again);
  CHECK(to_json(reread[0]) == to_json(events[0]));
  CHECK(to_json(reread[1]) == to_json(events[1]));

  for (const char* name : {"AddAsset", "RemoveAsset", "SetWeight", "SetCorrelation", "SetAlpha", "SetHorizon",
                           "SetSampleCount", "AttachHistory"})
    CHECK(to_string(event_kind_from_string(name)) == name);

  auto line_error = [](const std::string& s) {
    std::istringstream bad(s);
    try {
      read_script(bad);
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(line_error("{\"seq\":1,\"kind\":\"AddAsset\",\"payload\":{}}\n{oops\n").find("script line 2") !=
        std::string::npos);
  CHECK(line_error("{\"seq\":-1,\"kind\":\"AddAsset\",\"payload\":{}}\n").find("script line 1") != std::string::npos);
  CHECK(line_error("{\"seq\":1,\"kind\":\"Jump\",\"payload\":{}}\n").find("Jump") != std::string::npos);
}

TEST_CASE("report serialization") {
  RiskReport r;
  r.alpha = 0.95;
  r.horizon = 2;
  r.n = 10;
  r.var = 1.0;
  r.cvar = 1.5;
  r.evar = 2.0;
  const auto j = to_json(r);
  for (const char* k : {"alpha", "horizon", "n", "var", "cvar", "evar", "computed_at"}) CHECK(j.contains(k));
  CHECK_FALSE(to_json(r, false).contains("computed_at"));

  for (const MarginalDistribution& d :
       {MarginalDistribution{dist::Constant{1}}, MarginalDistribution{dist::Normal{0, 2}},
        MarginalDistribution{dist::LogNormal{0, 0.5}}, MarginalDistribution{dist::Uniform{-1, 3}},
        MarginalDistribution{dist::Triangular{0, 0, 1}}, MarginalDistribution{make_empirical({3, 1, 2})}})
    CHECK(distribution_from_json(to_json(d)) == d);
  CHECK(code_of([] { distribution_from_json({{"family", "cauchy"}}); }) == ErrorCode::parse);
  CHECK(code_of([] { distribution_from_json({{"family", "normal"}, {"mu", 0}}); }) == ErrorCode::parse);
}
