// sayo: headless runs of event scripts, a local service, and store maintenance.
//
//   sayo run demo.jsonl --out out/ [--seed 7 --samples 100000 ...]
//   sayo --script demo.jsonl --out out/
//   sayo --serve 8080 [--script demo.jsonl]
//   sayo ingest prices.csv --asset ACME
//   sayo export dir/ | sayo import dir/

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "sayo/error.hpp"
#include "sayo/events.hpp"
#include "sayo/service.hpp"
#include "sayo/session.hpp"
#include "sayo/store.hpp"

namespace fs = std::filesystem;
using namespace sayo;

namespace {

struct Options {
  std::string script;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<long long> samples;
  std::optional<double> alpha;
  std::optional<int> horizon;
  std::string store;
  bool no_cache = false;
  bool normalize = false;
  bool no_sensitivity = false;
  std::optional<int> serve;
  std::string host = "127.0.0.1";
};

SessionConfig config_of(const Options& o) {
  SessionConfig c;
  if (o.seed) c.seed = *o.seed;
  if (o.samples) c.n = static_cast<Eigen::Index>(*o.samples);
  if (o.alpha) c.alpha = *o.alpha;
  if (o.horizon) c.horizon = *o.horizon;
  c.normalize_weights = o.normalize;
  c.sensitivity = !o.no_sensitivity;
  c.validate();
  return c;
}

std::shared_ptr<const AssetStore> open_store(const Options& o) {
  if (!o.store.empty()) return std::make_shared<AssetStore>(o.store);
  if (std::getenv("SAYO_STORE")) return std::make_shared<AssetStore>(AssetStore::default_path());
  return nullptr;
}

std::vector<SessionEvent> load_script(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot read script '" + path + "'");
  return read_script(in);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  require(out.good(), ErrorCode::io, "cannot write '" + p.string() + "'");
  out << text;
}

int run(const Options& o) {
  const auto events = load_script(o.script);
  const SessionConfig config = config_of(o);
  auto cache = o.no_cache ? nullptr : std::make_shared<TupleCache>();
  LiveSession session("cli", config, cache, open_store(o));
  for (const auto& e : events) session.submit(e);
  session.wait_idle();

  int failures = 0;
  for (const auto& m : session.messages()) {
    if (m.kind != "error") continue;
    std::cerr << "sayo: event " << m.seq << ": " << m.body.value("code", "") << " error: "
              << m.body.value("message", "") << "\n";
    ++failures;
  }
  if (failures) return 1;

  const auto state = session.state();
  const fs::path out(o.out);
  fs::create_directories(out);
  write_file(out / "risk.json", risk_json(*state).dump(2) + "\n");
  write_file(out / "sensitivity.json", sensitivity_json(*state).dump(2) + "\n");
  write_file(out / "timing.csv", session.ledger().to_csv());
  write_file(out / "timing.json", session.ledger().summary(session.divisibility()).dump(2) + "\n");
  write_file(out / "snapshot.json", session.snapshot().dump(2) + "\n");
  std::cout << "wrote risk.json, sensitivity.json, timing.csv, timing.json, snapshot.json to " << out.string()
            << "\n";
  return 0;
}

int serve(const Options& o) {
  ServiceOptions so;
  so.defaults = config_of(o);
  so.cache = o.no_cache ? nullptr : std::make_shared<TupleCache>();
  so.store = open_store(o);
  HttpService service(so);
  if (!o.script.empty()) {
    auto session = service.sessions().create();
    for (const auto& e : load_script(o.script)) session->submit(e);
    std::cout << "loaded " << o.script << " into session " << session->id() << "\n";
  }
  const int port = service.bind(o.host, *o.serve);
  std::cout << "listening on http://" << o.host << ":" << port << std::endl;
  service.serve();
  return 0;
}

void add_session_flags(CLI::App& app, Options& o) {
  app.add_option("--out", o.out, "Directory for report files");
  app.add_option("--seed", o.seed, "Session seed");
  app.add_option("--samples", o.samples, "Monte-Carlo sample count N");
  app.add_option("--alpha", o.alpha, "Confidence level");
  app.add_option("--horizon", o.horizon, "Horizon in steps");
  app.add_option("--store", o.store, "Asset store file");
  app.add_flag("--no-cache", o.no_cache, "Disable the generated-tuple cache");
  app.add_flag("--normalize-weights", o.normalize, "Normalize sibling weights to sum to one");
  app.add_flag("--no-sensitivity", o.no_sensitivity, "Skip sensitivity analysis");
  app.add_option("--serve", o.serve, "Serve the HTTP API on this port (0 picks one)");
  app.add_option("--host", o.host, "Address to bind when serving");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental Monte-Carlo portfolio risk"};
  Options o;
  app.add_option("--script", o.script, "JSON-lines event script");
  add_session_flags(app, o);

  Options ro;
  auto* run_cmd = app.add_subcommand("run", "Run an event script headlessly");
  run_cmd->add_option("script", ro.script, "JSON-lines event script")->required();
  add_session_flags(*run_cmd, ro);

  std::string csv, asset, dir, store_path;
  auto* ingest = app.add_subcommand("ingest", "Ingest a price CSV into the store");
  ingest->add_option("csv", csv)->required();
  ingest->add_option("--asset", asset, "Asset id")->required();
  auto* exp = app.add_subcommand("export", "Export the store to a directory");
  exp->add_option("dir", dir)->required();
  auto* imp = app.add_subcommand("import", "Import a directory into the store");
  imp->add_option("dir", dir)->required();
  for (auto* sub : {ingest, exp, imp}) sub->add_option("--store", store_path, "Asset store file");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path sp = store_path.empty() ? AssetStore::default_path() : fs::path(store_path);
    if (*ingest) {
      std::ifstream in(csv);
      require(in.good(), ErrorCode::io, "cannot read '" + csv + "'");
      AssetStore store(sp);
      const auto h = store.ingest_prices(in, asset);
      std::cout << "ingested " << h.observations.size() << " rows for " << asset << " into " << sp.string() << "\n";
      return 0;
    }
    if (*exp) {
      AssetStore(sp).export_to(dir);
      return 0;
    }
    if (*imp) {
      AssetStore(sp).import_from(dir);
      return 0;
    }
    if (*run_cmd) return ro.serve ? serve(ro) : run(ro);
    if (o.serve) return serve(o);
    if (o.script.empty()) {
      std::cerr << app.help();
      return 2;
    }
    return run(o);
  } catch (const std::exception& e) {
    std::cerr << "sayo: " << e.what() << "\n";
    return 1;
  }
}
