#include "sayo/engine.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "sayo/error.hpp"
#include "sayo/json_io.hpp"
#include "sayo/rng.hpp"

namespace sayo {

void SessionConfig::validate() const {
  require(n >= 2, ErrorCode::parameter, "sample count must be at least 2");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::parameter, "alpha must lie in (0, 1)");
  require(horizon >= 1, ErrorCode::parameter, "horizon must be at least 1");
  require(sensitivity_order == 1 || sensitivity_order == 2, ErrorCode::parameter, "sensitivity order must be 1 or 2");
}

const Vector* PortfolioState::portfolio() const {
  const auto it = nodes.find(PortfolioTree::kRoot);
  return it == nodes.end() || !it->second.value ? nullptr : it->second.value.get();
}

const RiskReport* PortfolioState::root_report() const {
  const auto it = nodes.find(PortfolioTree::kRoot);
  return it == nodes.end() || !it->second.report ? nullptr : &*it->second.report;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

bool same_bits(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

bool same_bits(const std::shared_ptr<const Vector>& a, const std::shared_ptr<const Vector>& b) {
  if (!a || !b) return !a && !b;
  return same_bits(*a, *b);
}

std::uint64_t source_digest(const LeafSource& src) {
  if (const auto* d = std::get_if<MarginalDistribution>(&src)) return combine(1, hash_id(canonical_dump(to_json(*d))));
  const auto& h = std::get<std::shared_ptr<const PriceHistory>>(src);
  return combine(2, hash_id(canonical_dump(to_json(*h))));
}

// Payload accessors. Structural problems are parse errors.

const nlohmann::json& field(const nlohmann::json& p, const char* name) {
  const auto it = p.find(name);
  require(it != p.end(), ErrorCode::parse, std::string("payload is missing '") + name + "'");
  return *it;
}

std::string string_field(const nlohmann::json& p, const char* name) {
  const auto& v = field(p, name);
  require(v.is_string(), ErrorCode::parse, std::string("'") + name + "' must be a string");
  return v.get<std::string>();
}

double number_field(const nlohmann::json& p, const char* name) {
  const auto& v = field(p, name);
  require(v.is_number(), ErrorCode::parse, std::string("'") + name + "' must be a number");
  return v.get<double>();
}

std::int64_t integer_field(const nlohmann::json& p, const char* name) {
  const auto& v = field(p, name);
  require(v.is_number_integer(), ErrorCode::parse, std::string("'") + name + "' must be an integer");
  return v.get<std::int64_t>();
}

const AssetStore& need_store(const AssetStore* store) {
  require(store != nullptr, ErrorCode::precondition, "event refers to the asset store but none is configured");
  return *store;
}

std::shared_ptr<const PriceHistory> checked(PriceHistory h, const std::string& asset_id) {
  if (h.asset_id.empty()) h.asset_id = asset_id;
  validate(h);
  return std::make_shared<const PriceHistory>(std::move(h));
}

std::optional<LeafSource> parse_source(const nlohmann::json& p, const std::string& asset_id, const AssetStore* store) {
  static const char* const kinds[] = {"distribution", "asset_ref", "history", "history_ref", "csv"};
  int present = 0;
  for (const char* k : kinds) present += p.contains(k) ? 1 : 0;
  if (present == 0) return std::nullopt;
  require(present == 1, ErrorCode::parameter, "exactly one source is allowed for '" + asset_id + "'");

  if (p.contains("distribution")) return LeafSource{distribution_from_json(p["distribution"])};
  if (p.contains("asset_ref")) {
    const AssetRecord rec = need_store(store).get_asset(string_field(p, "asset_ref"));
    if (const auto* d = std::get_if<MarginalDistribution>(&rec.source)) return LeafSource{*d};
    return LeafSource{checked(store->get_history(std::get<HistoryRef>(rec.source).history_id), asset_id)};
  }
  if (p.contains("history")) return LeafSource{checked(history_from_json(p["history"]), asset_id)};
  if (p.contains("history_ref")) return LeafSource{checked(need_store(store).get_history(string_field(p, "history_ref")), asset_id)};
  std::istringstream csv(string_field(p, "csv"));
  return LeafSource{checked(parse_price_csv(csv, asset_id), asset_id)};
}

const std::string& leaf_name(const PortfolioTree& tree, const std::string& id) {
  const auto& n = tree.node(id);
  require(!n.composite, ErrorCode::parameter, "'" + id + "' is a composite, correlations apply to assets");
  return n.id;
}

void check_factorizable(const PortfolioState& s) {
  for (const auto& comp : correlation_components(s.tree.leaves(), s.pairs)) {
    if (comp.size() < 2) continue;
    try {
      (void)cholesky_factor(component_matrix(comp, s.pairs));
    } catch (const Error& e) {
      std::string members;
      for (const auto& m : comp) members += (members.empty() ? "" : ", ") + m;
      fail(e.code(), e.detail() + " (correlation group: " + members + ")");
    }
  }
}

void set_pair(CorrelationPairs& pairs, const std::string& a, const std::string& b, double rho) {
  require(std::isfinite(rho), ErrorCode::parameter, "correlation must be finite");
  if (a == b) {
    require(rho == 1.0, ErrorCode::parameter, "self-correlation of '" + a + "' must be 1");
    return;
  }
  require(std::abs(rho) <= 1.0, ErrorCode::decomposition,
          "correlation " + std::to_string(rho) + " between '" + a + "' and '" + b + "' lies outside [-1, 1]");
  const auto key = make_pair_key(a, b);
  if (rho == 0.0)
    pairs.erase(key);
  else
    pairs[key] = rho;
}

// Applies the model change of one event. Returns time spent factorizing.
double apply_model(PortfolioState& s, const SessionEvent& e, const AssetStore* store) {
  if (s.head) {
    require(e.seq > *s.head, ErrorCode::sequence,
            "event " + std::to_string(e.seq) + " does not follow " + std::to_string(*s.head));
  }
  const auto& p = e.payload;
  require(p.is_object(), ErrorCode::parse, "payload must be a JSON object");
  double factor_ms = 0.0;

  switch (e.kind) {
    case EventKind::add_asset: {
      const std::string id = string_field(p, "asset_id");
      const double weight = p.contains("weight") ? number_field(p, "weight") : 1.0;
      const std::string parent = p.contains("parent") ? string_field(p, "parent") : PortfolioTree::kRoot;
      const bool composite = p.value("composite", false);
      auto source = parse_source(p, id, store);
      if (composite) {
        require(!source, ErrorCode::parameter, "composite '" + id + "' cannot have a source");
        s.tree.add_composite(id, parent, weight);
      } else {
        require(source.has_value(), ErrorCode::parameter, "asset '" + id + "' needs a source");
        s.tree.add_leaf(id, parent, weight, *source);
        s.leaves[id].source_digest = source_digest(*source);
      }
      s.assets_added = true;
      break;
    }
    case EventKind::remove_asset: {
      const auto removed = s.tree.remove(string_field(p, "asset_id"));
      const std::set<std::string> gone(removed.begin(), removed.end());
      for (const auto& id : removed) {
        s.leaves.erase(id);
        s.nodes.erase(id);
      }
      std::erase_if(s.pairs, [&](const auto& kv) { return gone.count(kv.first.first) || gone.count(kv.first.second); });
      break;
    }
    case EventKind::set_weight:
      s.tree.set_weight(string_field(p, "asset_id"), number_field(p, "weight"));
      break;
    case EventKind::set_correlation: {
      if (p.contains("matrix")) {
        const auto& assets = field(p, "assets");
        const auto& rows = field(p, "matrix");
        require(assets.is_array() && rows.is_array(), ErrorCode::parse, "'assets' and 'matrix' must be arrays");
        const std::size_t m = assets.size();
        require(rows.size() == m, ErrorCode::shape, "correlation matrix has " + std::to_string(rows.size()) +
                                                        " rows for " + std::to_string(m) + " assets");
        std::vector<std::string> ids;
        for (const auto& a : assets) {
          require(a.is_string(), ErrorCode::parse, "'assets' must hold strings");
          ids.push_back(leaf_name(s.tree, a.get<std::string>()));
        }
        Matrix c(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) {
          require(rows[i].is_array() && rows[i].size() == m, ErrorCode::shape,
                  "correlation matrix row " + std::to_string(i) + " does not have " + std::to_string(m) + " entries");
          for (std::size_t j = 0; j < m; ++j) {
            require(rows[i][j].is_number(), ErrorCode::parse, "correlation entries must be numbers");
            c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
          }
        }
        const CorrelationMatrix corr(std::move(c));
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = i + 1; j < m; ++j)
            set_pair(s.pairs, ids[i], ids[j], corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      } else {
        const auto& list = field(p, "pairs");
        require(list.is_array(), ErrorCode::parse, "'pairs' must be an array");
        for (const auto& entry : list) {
          require(entry.is_object(), ErrorCode::parse, "each pair must be an object {a, b, rho}");
          set_pair(s.pairs, leaf_name(s.tree, string_field(entry, "a")), leaf_name(s.tree, string_field(entry, "b")),
                   number_field(entry, "rho"));
        }
      }
      const auto t0 = Clock::now();
      check_factorizable(s);
      factor_ms = ms_since(t0);
      break;
    }
    case EventKind::set_alpha: {
      const double alpha = number_field(p, "alpha");
      require(alpha > 0.0 && alpha < 1.0, ErrorCode::parameter, "alpha must lie in (0, 1)");
      s.config.alpha = alpha;
      break;
    }
    case EventKind::set_horizon: {
      const auto h = integer_field(p, "horizon");
      require(h >= 1 && h <= 100'000, ErrorCode::parameter, "horizon must be a positive step count");
      s.config.horizon = static_cast<int>(h);
      break;
    }
    case EventKind::set_sample_count: {
      require(!s.assets_added, ErrorCode::precondition, "the sample count can only change before the first AddAsset");
      const auto n = integer_field(p, "n");
      require(n >= 2, ErrorCode::parameter, "sample count must be at least 2");
      s.config.n = static_cast<Eigen::Index>(n);
      break;
    }
    case EventKind::attach_history: {
      const std::string id = string_field(p, "asset_id");
      require(s.tree.contains(id), ErrorCode::not_found, "unknown node '" + id + "'");
      auto source = parse_source(p, id, store);
      require(source && std::holds_alternative<std::shared_ptr<const PriceHistory>>(*source), ErrorCode::parameter,
              "AttachHistory needs one of 'history', 'history_ref', 'csv' or an 'asset_ref' to a history");
      s.tree.set_source(id, *source);
      s.leaves[id].source_digest = source_digest(*source);
      break;
    }
  }
  s.head = e.seq;
  return factor_ms;
}

double apply_checked(PortfolioState& s, const SessionEvent& e, const AssetStore* store) {
  try {
    return apply_model(s, e, store);
  } catch (const nlohmann::json::exception& x) {
    fail(ErrorCode::parse, std::string("malformed payload: ") + x.what());
  }
}

struct RefreshResult {
  PhaseTimes times;
  std::vector<std::string> regenerated;
  std::map<std::string, RiskReport> reports;
  bool sensitivity_updated = false;
};

constexpr std::uint64_t kNormalTag = 0x6e6f726d616c0001ULL;
constexpr std::uint64_t kValueTag = 0x76616c7565000002ULL;
constexpr std::uint64_t kDriverTag = 0x6472697665720003ULL;

class Generator {
 public:
  Generator(const PortfolioState& s, TupleCache* cache, PhaseTimes& times) : s_(s), cache_(cache), times_(times) {}

  std::uint64_t component_digest(const std::vector<std::string>& comp) const {
    std::uint64_t h = combine(combine(combine(0, static_cast<std::uint64_t>(s_.config.n)), s_.config.seed),
                              static_cast<std::uint64_t>(s_.config.horizon));
    for (const auto& id : comp) h = combine(combine(h, hash_id(id)), s_.leaves.at(id).source_digest);
    for (std::size_t i = 0; i < comp.size(); ++i)
      for (std::size_t j = i + 1; j < comp.size(); ++j) {
        const auto it = s_.pairs.find(make_pair_key(comp[i], comp[j]));
        if (it != s_.pairs.end()) h = combine(combine(h, i * comp.size() + j), bits(it->second));
      }
    return h;
  }

  // Fills tuple and driver for every member of the component.
  void generate(const std::vector<std::string>& comp, std::uint64_t digest, std::map<std::string, LeafState>& out) {
    const Eigen::Index n = s_.config.n;
    if (cache_ && from_cache(comp, digest, out)) return;

    std::vector<Vector> values(comp.size(), Vector::Zero(n));
    std::vector<Vector> drivers(comp.size(), Vector::Zero(n));
    const auto& single = s_.tree.node(comp.front()).source;
    if (comp.size() == 1 && std::holds_alternative<std::shared_ptr<const PriceHistory>>(single)) {
      const auto t0 = Clock::now();
      const auto& hist = *std::get<std::shared_ptr<const PriceHistory>>(single);
      const SampleTuple returns = historical_returns(hist, 1);
      const std::uint64_t seed = derive_seed(s_.config.seed, comp.front());
      for (int step = 0; step < s_.config.horizon; ++step) {
        const SampleTuple draw = bootstrap(returns, n, combine(seed, static_cast<std::uint64_t>(step)));
        if (step == 0)
          values[0] = draw.values;
        else
          values[0] += draw.values;
      }
      drivers[0] = values[0];
      times_.gt_ms += ms_since(t0);
    } else {
      std::vector<MarginalDistribution> marginals;
      for (const auto& id : comp) {
        const auto& src = s_.tree.node(id).source;
        if (const auto* d = std::get_if<MarginalDistribution>(&src))
          marginals.push_back(*d);
        else
          marginals.push_back(make_empirical(
              [&] {
                const Vector r = historical_returns(*std::get<std::shared_ptr<const PriceHistory>>(src), 1).values;
                return std::vector<double>(r.data(), r.data() + r.size());
              }()));
      }
      const CorrelationMatrix corr = component_matrix(comp, s_.pairs);
      for (int step = 0; step < s_.config.horizon; ++step) {
        auto t0 = Clock::now();
        std::vector<SampleTuple> normals;
        for (const auto& id : comp) normals.push_back(normal_draws(id, step));
        times_.gt_ms += ms_since(t0);
        t0 = Clock::now();
        const auto mixed = correlate_tuples(normals, corr, marginals);
        (comp.size() > 1 ? times_.st_ex_ms : times_.gt_ms) += ms_since(t0);
        for (std::size_t k = 0; k < comp.size(); ++k) {
          if (step == 0) {
            values[k] = mixed[k].values;
            drivers[k] = normals[k].values;
          } else {
            values[k] += mixed[k].values;
            drivers[k] += normals[k].values;
          }
        }
      }
    }
    for (std::size_t k = 0; k < comp.size(); ++k) {
      auto v = std::make_shared<const Vector>(std::move(values[k]));
      auto d = std::make_shared<const Vector>(std::move(drivers[k]));
      if (cache_) {
        cache_->store(key(comp[k], digest, kValueTag), v);
        cache_->store(key(comp[k], digest, kDriverTag), d);
      }
      install(comp[k], digest, comp.size() > 1, *v, std::move(d), out);
    }
  }

 private:
  TupleKey key(const std::string& id, std::uint64_t digest, std::uint64_t tag) const {
    return TupleKey{id, derive_seed(s_.config.seed, id), s_.config.n, s_.config.horizon, combine(digest, tag)};
  }

  bool from_cache(const std::vector<std::string>& comp, std::uint64_t digest, std::map<std::string, LeafState>& out) {
    const auto t0 = Clock::now();
    std::vector<std::shared_ptr<const Vector>> v, d;
    for (const auto& id : comp) {
      v.push_back(cache_->fetch(key(id, digest, kValueTag)));
      d.push_back(cache_->fetch(key(id, digest, kDriverTag)));
      if (!v.back() || !d.back()) return false;
    }
    for (std::size_t k = 0; k < comp.size(); ++k) install(comp[k], digest, comp.size() > 1, *v[k], d[k], out);
    times_.gt_ms += ms_since(t0);
    return true;
  }

  SampleTuple normal_draws(const std::string& id, int step) {
    const std::uint64_t seed = derive_seed(s_.config.seed, id);
    SampleTuple t{Vector(), id, seed, 0};
    const TupleKey k{id, seed, s_.config.n, step, kNormalTag};
    if (cache_) {
      if (auto hit = cache_->fetch(k)) {
        t.values = *hit;
        return t;
      }
    }
    t.values = standard_normal(s_.config.n, CounterRng(seed, static_cast<std::uint64_t>(step)));
    if (cache_) cache_->store(k, std::make_shared<const Vector>(t.values));
    return t;
  }

  void install(const std::string& id, std::uint64_t digest, bool correlated, const Vector& value,
               std::shared_ptr<const Vector> driver, std::map<std::string, LeafState>& out) {
    LeafState& leaf = out[id];
    const std::uint64_t generation = leaf.tuple ? leaf.tuple->generation + 1 : 1;
    leaf.tuple = std::make_shared<const SampleTuple>(SampleTuple{value, id, derive_seed(s_.config.seed, id), generation});
    leaf.driver = std::move(driver);
    leaf.bins.reset();
    leaf.digest = digest;
    leaf.correlated = correlated;
  }

  const PortfolioState& s_;
  TupleCache* cache_;
  PhaseTimes& times_;
};

RefreshResult refresh(PortfolioState& s, TupleCache* cache) {
  RefreshResult r;
  std::set<std::string> replaced;
  const Eigen::Index n = s.config.n;

  // Tuples whose inputs changed.
  Generator gen(s, cache, r.times);
  const auto leaves = s.tree.leaves();
  for (const auto& comp : correlation_components(leaves, s.pairs)) {
    const std::uint64_t digest = gen.component_digest(comp);
    bool fresh = true;
    for (const auto& id : comp) {
      const auto& leaf = s.leaves.at(id);
      fresh = fresh && leaf.tuple && leaf.digest == digest;
    }
    if (fresh) continue;
    gen.generate(comp, digest, s.leaves);
    for (const auto& id : comp) {
      r.regenerated.push_back(id);
      replaced.insert(id);
      const auto& tuple = s.leaves.at(id).tuple;
      s.nodes[id].value = std::shared_ptr<const Vector>(tuple, &tuple->values);
    }
  }

  // Composite sums, children before parents. Each sum is rebuilt from its
  // children in id order.
  const auto st0 = Clock::now();
  for (const auto& id : s.tree.post_order()) {
    const PortfolioNode& node = s.tree.node(id);
    if (!node.composite) continue;
    NodeState& ns = s.nodes[id];
    std::vector<std::pair<std::string, double>> terms;
    bool stale = false;
    for (const auto& c : node.children) {
      const auto it = s.nodes.find(c);
      if (it == s.nodes.end() || !it->second.value) continue;
      terms.emplace_back(c, s.tree.effective_weight(c, s.config.normalize_weights));
      stale = stale || replaced.count(c) != 0;
    }
    const auto same_terms = [](const auto& a, const auto& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].first != b[i].first || bits(a[i].second) != bits(b[i].second)) return false;
      return true;
    };
    if (!stale && ns.value && same_terms(terms, ns.terms)) continue;
    if (!stale && !ns.value && terms.empty()) continue;
    if (terms.empty()) {
      ns.value.reset();
      ns.report.reset();
    } else {
      Vector sum = Vector::Zero(n);
      for (const auto& [c, w] : terms) sum += w * *s.nodes.at(c).value;
      ns.value = std::make_shared<const Vector>(std::move(sum));
    }
    ns.terms = std::move(terms);
    replaced.insert(id);
  }

  // Exposures and reports.
  for (const auto& id : s.tree.post_order()) {
    NodeState& ns = s.nodes[id];
    double exposure = 1.0;
    for (std::string cur = id; cur != PortfolioTree::kRoot; cur = s.tree.node(cur).parent)
      exposure *= s.tree.effective_weight(cur, s.config.normalize_weights);
    const bool moved = bits(exposure) != bits(ns.exposure);
    ns.exposure = exposure;
    if (!ns.value) {
      ns.report.reset();
      continue;
    }
    const bool current = ns.report && !moved && !replaced.count(id) && ns.report->alpha == s.config.alpha &&
                         ns.report->horizon == s.config.horizon;
    if (current) continue;
    ns.report = exposure == 1.0 ? risk_report(*ns.value, s.config.alpha, s.config.horizon)
                                : risk_report(Vector(exposure * *ns.value), s.config.alpha, s.config.horizon);
    r.reports.emplace(id, *ns.report);
  }
  r.times.st_ms += ms_since(st0);

  // Sensitivity over the parameterized inputs, against the portfolio return.
  const bool root_changed = replaced.count(PortfolioTree::kRoot) != 0;
  if (s.config.sensitivity && root_changed) {
    r.sensitivity_updated = true;
    s.sensitivity.reset();
    s.sensitivity_error.clear();
    if (const Vector* y = s.portfolio()) {
      const int bins = s.config.sensitivity_bins > 0 ? s.config.sensitivity_bins : default_bin_count(n);
      std::vector<const BinnedInput*> view;
      std::vector<std::string> ids;
      for (const auto& id : leaves) {
        LeafState& leaf = s.leaves.at(id);
        if (!leaf.bins) leaf.bins = std::make_shared<const BinnedInput>(bin_input(*leaf.driver, bins));
        view.push_back(leaf.bins.get());
        ids.push_back(id);
      }
      try {
        AnovaResult a = anova_from_bins(view, *y, s.config.sensitivity_order);
        a.report.inputs = std::move(ids);
        s.sensitivity = std::move(a.report);
      } catch (const Error& e) {
        s.sensitivity_error = e.what();
      }
    }
  } else if (!s.config.sensitivity) {
    s.sensitivity.reset();
  }
  return r;
}

bool same_report(const std::optional<RiskReport>& a, const std::optional<RiskReport>& b) {
  if (!a || !b) return !a && !b;
  return same_measures(*a, *b);
}

bool same_sensitivity(const std::optional<SensitivityReport>& a, const std::optional<SensitivityReport>& b) {
  if (!a || !b) return !a && !b;
  if (bits(a->variance) != bits(b->variance) || a->inputs != b->inputs || a->n != b->n ||
      a->estimator != b->estimator || bits(a->unattributed) != bits(b->unattributed))
    return false;
  if (!same_bits(a->main, b->main) || !same_bits(a->total, b->total)) return false;
  if (a->interactions.size() != b->interactions.size()) return false;
  for (auto i = a->interactions.begin(), j = b->interactions.begin(); i != a->interactions.end(); ++i, ++j)
    if (i->first != j->first || bits(i->second) != bits(j->second)) return false;
  return true;
}

bool same_config(const SessionConfig& a, const SessionConfig& b) {
  return a.n == b.n && bits(a.alpha) == bits(b.alpha) && a.horizon == b.horizon && a.seed == b.seed &&
         a.normalize_weights == b.normalize_weights && a.sensitivity == b.sensitivity &&
         a.sensitivity_bins == b.sensitivity_bins && a.sensitivity_order == b.sensitivity_order;
}

bool same_source(const LeafSource& a, const LeafSource& b) {
  if (a.index() != b.index()) return false;
  if (const auto* d = std::get_if<MarginalDistribution>(&a)) return *d == std::get<MarginalDistribution>(b);
  return *std::get<1>(a) == *std::get<1>(b);
}

}  // namespace

bool equivalent(const PortfolioState& a, const PortfolioState& b) {
  if (!same_config(a.config, b.config) || a.head != b.head) return false;
  if (a.tree.nodes().size() != b.tree.nodes().size()) return false;
  for (auto i = a.tree.nodes().begin(), j = b.tree.nodes().begin(); i != a.tree.nodes().end(); ++i, ++j) {
    const auto &x = i->second, &y = j->second;
    if (x.id != y.id || x.parent != y.parent || bits(x.weight) != bits(y.weight) || x.composite != y.composite ||
        x.children != y.children || (!x.composite && !same_source(x.source, y.source)))
      return false;
  }
  if (a.pairs.size() != b.pairs.size()) return false;
  for (auto i = a.pairs.begin(), j = b.pairs.begin(); i != a.pairs.end(); ++i, ++j)
    if (i->first != j->first || bits(i->second) != bits(j->second)) return false;
  if (a.leaves.size() != b.leaves.size()) return false;
  for (auto i = a.leaves.begin(), j = b.leaves.begin(); i != a.leaves.end(); ++i, ++j) {
    const auto &x = i->second, &y = j->second;
    if (i->first != j->first || !x.tuple || !y.tuple || x.tuple->asset_id != y.tuple->asset_id ||
        x.tuple->seed != y.tuple->seed || !same_bits(x.tuple->values, y.tuple->values) ||
        !same_bits(x.driver, y.driver) || x.digest != y.digest)
      return false;
  }
  if (a.nodes.size() != b.nodes.size()) return false;
  for (auto i = a.nodes.begin(), j = b.nodes.begin(); i != a.nodes.end(); ++i, ++j) {
    if (i->first != j->first || !same_bits(i->second.value, j->second.value) ||
        bits(i->second.exposure) != bits(j->second.exposure) || !same_report(i->second.report, j->second.report))
      return false;
  }
  return same_sensitivity(a.sensitivity, b.sensitivity) && a.sensitivity_error == b.sensitivity_error;
}

PortfolioEngine::PortfolioEngine(SessionConfig config, std::shared_ptr<TupleCache> cache,
                                 std::shared_ptr<const AssetStore> store)
    : cache_(std::move(cache)), store_(std::move(store)) {
  config.validate();
  auto s = std::make_shared<PortfolioState>();
  s->config = config;
  state_ = std::move(s);
}

UpdateNotification PortfolioEngine::apply(const SessionEvent& event) {
  const auto t0 = Clock::now();
  auto next = std::make_shared<PortfolioState>(*state_);
  const double factor_ms = apply_checked(*next, event, store_.get());
  RefreshResult r = refresh(*next, cache_.get());

  UpdateNotification u;
  u.seq = event.seq;
  u.kind = event.kind;
  if (const RiskReport* root = next->root_report()) u.portfolio = *root;
  u.nodes = std::move(r.reports);
  u.sensitivity_updated = r.sensitivity_updated;
  u.sensitivity = next->sensitivity;
  u.sensitivity_error = next->sensitivity_error;
  if (next->tree.dimensionality() > 0) u.divisibility = classify_divisibility(next->tree, next->pairs);
  u.regenerated = std::move(r.regenerated);
  u.times = r.times;
  u.times.oh_ex_ms = factor_ms;
  state_ = std::move(next);
  const double total = ms_since(t0);
  u.times.ot_ms = std::max(0.0, total - u.times.gt_ms - u.times.st_ms - u.times.st_ex_ms - u.times.oh_ex_ms);
  return u;
}

std::shared_ptr<const PortfolioState> batch(SessionConfig config, const std::vector<SessionEvent>& events,
                                            std::shared_ptr<TupleCache> cache, std::shared_ptr<const AssetStore> store) {
  config.validate();
  auto s = std::make_shared<PortfolioState>();
  s->config = config;
  for (const auto& e : events) (void)apply_checked(*s, e, store.get());
  (void)refresh(*s, cache.get());
  return s;
}

nlohmann::json portfolio_json(const PortfolioState& s) {
  using nlohmann::json;
  json assets = json::array();
  for (const auto& id : s.tree.post_order()) {
    if (id == PortfolioTree::kRoot) continue;
    const PortfolioNode& n = s.tree.node(id);
    json a{{"asset_id", id}, {"parent", n.parent}, {"weight", n.weight}, {"kind", n.composite ? "composite" : "leaf"}};
    const auto it = s.nodes.find(id);
    a["exposure"] = it == s.nodes.end() ? n.weight : it->second.exposure;
    if (!n.composite) {
      if (const auto* d = std::get_if<MarginalDistribution>(&n.source))
        a["distribution"] = to_json(*d);
      else
        a["history"] = json{{"asset_id", std::get<1>(n.source)->asset_id},
                            {"observations", std::get<1>(n.source)->observations.size()}};
      a["correlated"] = s.leaves.count(id) && s.leaves.at(id).correlated;
    }
    assets.push_back(std::move(a));
  }
  std::sort(assets.begin(), assets.end(),
            [](const json& x, const json& y) { return x["asset_id"].get<std::string>() < y["asset_id"].get<std::string>(); });
  json corr = json::array();
  for (const auto& [k, rho] : s.pairs) corr.push_back({{"a", k.first}, {"b", k.second}, {"rho", rho}});
  json out{{"assets", std::move(assets)},
           {"correlations", std::move(corr)},
           {"alpha", s.config.alpha},
           {"horizon", s.config.horizon},
           {"n", s.config.n},
           {"seed", s.config.seed},
           {"normalize_weights", s.config.normalize_weights},
           {"dimensionality", s.tree.dimensionality()}};
  out["divisibility"] =
      s.tree.dimensionality() > 0 ? json(to_string(classify_divisibility(s.tree, s.pairs))) : json(nullptr);
  return out;
}

nlohmann::json risk_json(const PortfolioState& s, bool include_timestamp) {
  using nlohmann::json;
  json nodes = json::object();
  for (const auto& [id, ns] : s.nodes)
    if (id != PortfolioTree::kRoot && ns.report) nodes[id] = to_json(*ns.report, include_timestamp);
  const RiskReport* root = s.root_report();
  return json{{"portfolio", root ? to_json(*root, include_timestamp) : json(nullptr)}, {"nodes", std::move(nodes)}};
}

nlohmann::json risk_json(const UpdateNotification& u, bool include_timestamp) {
  using nlohmann::json;
  json nodes = json::object();
  for (const auto& [id, r] : u.nodes)
    if (id != PortfolioTree::kRoot) nodes[id] = to_json(r, include_timestamp);
  json out{{"portfolio", u.portfolio ? to_json(*u.portfolio, include_timestamp) : json(nullptr)},
           {"nodes", std::move(nodes)},
           {"regenerated", u.regenerated}};
  out["divisibility"] = u.divisibility ? json(to_string(*u.divisibility)) : json(nullptr);
  return out;
}

nlohmann::json sensitivity_json(const PortfolioState& s) {
  if (s.sensitivity) return to_json(*s.sensitivity);
  if (!s.sensitivity_error.empty()) return nlohmann::json{{"error", s.sensitivity_error}};
  return nullptr;
}

nlohmann::json times_json(const PhaseTimes& t) {
  return {{"gt_ms", t.gt_ms}, {"st_ms", t.st_ms}, {"ot_ms", t.ot_ms}, {"st_ex_ms", t.st_ex_ms}, {"oh_ex_ms", t.oh_ex_ms}};
}

}  // namespace sayo
