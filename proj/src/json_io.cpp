#include "sayo/json_io.hpp"

#include "sayo/error.hpp"

namespace sayo {

namespace {

double number(const json& j, const char* field) {
  const auto it = j.find(field);
  require(it != j.end() && it->is_number(), ErrorCode::parse, std::string("missing numeric field '") + field + "'");
  return it->get<double>();
}

std::string iso_now(std::chrono::system_clock::time_point t) {
  return format_iso8601(std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count());
}

}  // namespace

json to_json(const MarginalDistribution& d) {
  json j{{"family", family_name(d)}};
  if (const auto* c = std::get_if<dist::Constant>(&d)) j["value"] = c->value;
  if (const auto* n = std::get_if<dist::Normal>(&d)) j["mu"] = n->mu, j["sigma"] = n->sigma;
  if (const auto* n = std::get_if<dist::LogNormal>(&d)) j["mu_log"] = n->mu_log, j["sigma_log"] = n->sigma_log;
  if (const auto* u = std::get_if<dist::Uniform>(&d)) j["lo"] = u->lo, j["hi"] = u->hi;
  if (const auto* t = std::get_if<dist::Triangular>(&d)) j["lo"] = t->lo, j["mode"] = t->mode, j["hi"] = t->hi;
  if (const auto* e = std::get_if<dist::Empirical>(&d)) j["samples"] = e->sorted;
  return j;
}

MarginalDistribution distribution_from_json(const json& j) {
  require(j.is_object(), ErrorCode::parse, "distribution must be a JSON object");
  const auto family = j.value("family", std::string());
  MarginalDistribution d;
  if (family == "constant") {
    d = dist::Constant{number(j, "value")};
  } else if (family == "normal") {
    d = dist::Normal{number(j, "mu"), number(j, "sigma")};
  } else if (family == "lognormal") {
    d = dist::LogNormal{number(j, "mu_log"), number(j, "sigma_log")};
  } else if (family == "uniform") {
    d = dist::Uniform{number(j, "lo"), number(j, "hi")};
  } else if (family == "triangular") {
    d = dist::Triangular{number(j, "lo"), number(j, "mode"), number(j, "hi")};
  } else if (family == "empirical") {
    const auto it = j.find("samples");
    require(it != j.end() && it->is_array(), ErrorCode::parse, "empirical distribution needs a 'samples' array");
    std::vector<double> samples;
    for (const auto& v : *it) {
      require(v.is_number(), ErrorCode::parse, "empirical samples must be numbers");
      samples.push_back(v.get<double>());
    }
    d = make_empirical(std::move(samples));
  } else {
    fail(ErrorCode::parse, "unknown distribution family '" + family + "'");
  }
  validate(d);
  return d;
}

json to_json(const RiskReport& r, bool include_timestamp) {
  json j{{"alpha", r.alpha}, {"horizon", r.horizon}, {"n", r.n},
         {"var", r.var},     {"cvar", r.cvar},       {"evar", r.evar}};
  if (include_timestamp) j["computed_at"] = iso_now(r.computed_at);
  return j;
}

json to_json(const SensitivityReport& r) {
  json s_ij = json::object();
  for (const auto& [pair, v] : r.interactions) {
    s_ij[r.inputs.at(static_cast<std::size_t>(pair.first)) + "," + r.inputs.at(static_cast<std::size_t>(pair.second))] = v;
  }
  return json{{"D", r.variance},
              {"S", std::vector<double>(r.main.begin(), r.main.end())},
              {"S_tot", std::vector<double>(r.total.begin(), r.total.end())},
              {"S_ij", s_ij},
              {"inputs", r.inputs},
              {"n", r.n},
              {"estimator", to_string(r.estimator)},
              {"unattributed", r.unattributed}};
}

json to_json(const PriceHistory& h) {
  json obs = json::array();
  for (const auto& o : h.observations) obs.push_back(json::array({o.timestamp, o.price}));
  return json{{"asset_id", h.asset_id}, {"observations", obs}};
}

PriceHistory history_from_json(const json& j) {
  require(j.is_object(), ErrorCode::parse, "price history must be a JSON object");
  PriceHistory h;
  h.asset_id = j.value("asset_id", std::string());
  const auto it = j.find("observations");
  require(it != j.end() && it->is_array(), ErrorCode::parse, "price history needs an 'observations' array");
  std::size_t index = 0;
  for (const auto& row : *it) {
    std::string ts;
    double price = 0.0;
    if (row.is_array() && row.size() == 2 && row[0].is_string() && row[1].is_number()) {
      ts = row[0].get<std::string>();
      price = row[1].get<double>();
    } else if (row.is_object() && row.contains("timestamp") && row.contains("price")) {
      ts = row.at("timestamp").get<std::string>();
      price = row.at("price").get<double>();
    } else {
      fail(ErrorCode::parse, "malformed observation at index " + std::to_string(index));
    }
    const auto ms = parse_iso8601(ts);
    require(ms.has_value(), ErrorCode::parse, "bad timestamp '" + ts + "' at index " + std::to_string(index));
    h.observations.push_back({ts, *ms, price});
    ++index;
  }
  validate(h);
  return h;
}

json to_json(const AssetRecord& r) {
  json j{{"asset_id", r.asset_id}, {"name", r.name}, {"updated_at", r.updated_at}};
  if (const auto* d = std::get_if<MarginalDistribution>(&r.source)) {
    j["distribution"] = to_json(*d);
  } else {
    j["history_ref"] = std::get<HistoryRef>(r.source).history_id;
  }
  return j;
}

AssetRecord asset_from_json(const json& j) {
  require(j.is_object() && j.contains("asset_id") && j["asset_id"].is_string(), ErrorCode::parse,
          "asset record needs a string 'asset_id'");
  AssetRecord r;
  r.asset_id = j["asset_id"].get<std::string>();
  r.name = j.value("name", std::string());
  r.updated_at = j.value("updated_at", std::string());
  const bool has_dist = j.contains("distribution");
  const bool has_hist = j.contains("history_ref");
  require(has_dist != has_hist, ErrorCode::parse,
          "asset record '" + r.asset_id + "' needs exactly one of 'distribution' or 'history_ref'");
  if (has_dist) {
    r.source = distribution_from_json(j["distribution"]);
  } else {
    r.source = HistoryRef{j["history_ref"].get<std::string>()};
  }
  return r;
}

std::string canonical_dump(const json& j) { return j.dump(); }

}  // namespace sayo
