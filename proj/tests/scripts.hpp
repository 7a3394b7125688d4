#pragma once

// Event construction and random session scripts for the engine suites.

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sayo/events.hpp"

namespace scripts {

using nlohmann::json;

inline sayo::SessionEvent event(std::uint64_t seq, sayo::EventKind kind, json payload) {
  sayo::SessionEvent e;
  e.seq = seq;
  e.kind = kind;
  e.payload = std::move(payload);
  return e;
}

inline json normal(double mu, double sigma) { return {{"family", "normal"}, {"mu", mu}, {"sigma", sigma}}; }
inline json constant(double c) { return {{"family", "constant"}, {"value", c}}; }

inline sayo::SessionEvent add(std::uint64_t seq, const std::string& id, json dist, double weight = 1.0,
                              const std::string& parent = "") {
  json p{{"asset_id", id}, {"weight", weight}, {"distribution", std::move(dist)}};
  if (!parent.empty()) p["parent"] = parent;
  return event(seq, sayo::EventKind::add_asset, std::move(p));
}

inline sayo::SessionEvent add_group(std::uint64_t seq, const std::string& id, double weight = 1.0,
                                    const std::string& parent = "") {
  json p{{"asset_id", id}, {"weight", weight}, {"composite", true}};
  if (!parent.empty()) p["parent"] = parent;
  return event(seq, sayo::EventKind::add_asset, std::move(p));
}

inline sayo::SessionEvent reweight(std::uint64_t seq, const std::string& id, double w) {
  return event(seq, sayo::EventKind::set_weight, {{"asset_id", id}, {"weight", w}});
}

inline sayo::SessionEvent remove(std::uint64_t seq, const std::string& id) {
  return event(seq, sayo::EventKind::remove_asset, {{"asset_id", id}});
}

inline sayo::SessionEvent correlate(std::uint64_t seq, const std::string& a, const std::string& b, double rho) {
  return event(seq, sayo::EventKind::set_correlation, {{"pairs", json::array({{{"a", a}, {"b", b}, {"rho", rho}}})}});
}

inline json random_distribution(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (std::uniform_int_distribution<int>(0, 5)(rng)) {
    case 0: return constant(0.02 * u(rng) - 0.01);
    case 1: return normal(0.01 * u(rng), 0.01 + 0.05 * u(rng));
    case 2: return {{"family", "lognormal"}, {"mu_log", -3.0 + u(rng)}, {"sigma_log", 0.1 + 0.4 * u(rng)}};
    case 3: return {{"family", "uniform"}, {"lo", -0.05 - 0.05 * u(rng)}, {"hi", 0.05 + 0.05 * u(rng)}};
    case 4: return {{"family", "triangular"}, {"lo", -0.1}, {"mode", 0.02 * u(rng)}, {"hi", 0.1}};
    default: {
      json samples = json::array();
      for (int i = 0; i < 8; ++i) samples.push_back(0.1 * u(rng) - 0.05);
      return {{"family", "empirical"}, {"samples", samples}};
    }
  }
}

inline json random_history(std::mt19937_64& rng, const std::string& id) {
  std::normal_distribution<double> g(0.0, 0.02);
  json rows = json::array();
  double price = 100.0;
  for (int d = 1; d <= 30; ++d) {
    char ts[32];
    std::snprintf(ts, sizeof ts, "2024-01-%02dT00:00:00Z", d);
    rows.push_back(json::array({ts, price}));
    price *= std::exp(g(rng));
  }
  return {{"asset_id", id}, {"observations", rows}};
}

// Random add/reweight/remove script that stays valid event by event.
// With `rich`, composites, history leaves and correlations are mixed in.
inline std::vector<sayo::SessionEvent> random_script(std::mt19937_64& rng, int length, bool rich) {
  std::vector<sayo::SessionEvent> out;
  std::map<std::string, std::string> parent;  // node -> parent
  std::set<std::string> leaves, groups;
  std::map<std::pair<std::string, std::string>, double> rho;
  std::map<std::string, double> load;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int next_id = 0;
  std::uint64_t seq = 1;

  auto pick = [&](const std::set<std::string>& s) {
    auto it = s.begin();
    std::advance(it, std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng));
    return *it;
  };
  auto drop = [&](const std::string& id) {
    std::vector<std::string> doomed{id};
    for (std::size_t i = 0; i < doomed.size(); ++i)
      for (const auto& [c, p] : parent)
        if (p == doomed[i]) doomed.push_back(c);
    for (const auto& d : doomed) {
      parent.erase(d);
      leaves.erase(d);
      groups.erase(d);
      for (auto it = rho.begin(); it != rho.end();) {
        if (it->first.first == d || it->first.second == d) {
          load[it->first.first] -= std::abs(it->second);
          load[it->first.second] -= std::abs(it->second);
          it = rho.erase(it);
        } else {
          ++it;
        }
      }
    }
  };

  while (static_cast<int>(out.size()) < length) {
    const double r = u(rng);
    const std::string where = (rich && !groups.empty() && u(rng) < 0.5) ? pick(groups) : std::string();
    if (leaves.size() < 2 || r < 0.4) {
      const std::string id = "a" + std::to_string(next_id++);
      const double w = std::round(200.0 * u(rng)) / 4.0 - 10.0;
      if (rich && u(rng) < 0.15) {
        json p{{"asset_id", id}, {"weight", w}, {"history", random_history(rng, id)}};
        if (!where.empty()) p["parent"] = where;
        out.push_back(event(seq++, sayo::EventKind::add_asset, p));
      } else {
        out.push_back(add(seq++, id, random_distribution(rng), w, where));
      }
      leaves.insert(id);
      parent[id] = where;
    } else if (rich && r < 0.5) {
      const std::string id = "g" + std::to_string(next_id++);
      out.push_back(add_group(seq++, id, 0.5 + u(rng), where));
      groups.insert(id);
      parent[id] = where;
    } else if (r < 0.8) {
      std::set<std::string> nodes = leaves;
      nodes.insert(groups.begin(), groups.end());
      const std::string id = pick(nodes);
      const double roll = u(rng);
      const double w = roll < 0.15 ? 0.0 : std::round(400.0 * u(rng)) / 8.0 - 10.0;
      out.push_back(reweight(seq++, id, w));
    } else if (rich && r < 0.9 && leaves.size() >= 2) {
      const std::string a = pick(leaves), b = pick(leaves);
      if (a == b) continue;
      const double value = std::round(40.0 * u(rng) - 20.0) / 100.0;
      const auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
      const double old = rho.count(key) ? std::abs(rho[key]) : 0.0;
      if (load[a] - old + std::abs(value) > 0.9 || load[b] - old + std::abs(value) > 0.9) continue;
      load[a] += std::abs(value) - old;
      load[b] += std::abs(value) - old;
      rho[key] = value;
      out.push_back(correlate(seq++, a, b, value));
    } else {
      std::set<std::string> nodes = leaves;
      nodes.insert(groups.begin(), groups.end());
      const std::string id = pick(nodes);
      out.push_back(remove(seq++, id));
      drop(id);
    }
  }
  return out;
}

}  // namespace scripts
