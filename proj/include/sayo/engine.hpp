#pragma once

// The incremental session engine. Each event is applied to a copy of the
// current state; the copy is refreshed (tuples regenerated, sums and reports
// recomputed) only where its inputs changed, then published as an immutable
// snapshot. A failed event leaves the published state untouched.
//
// Everything derived is a pure function of the model (tree, sources,
// correlations, config), so replaying a script incrementally or once as a
// batch gives bit-identical tuples and reports.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sayo/events.hpp"
#include "sayo/portfolio.hpp"
#include "sayo/risk.hpp"
#include "sayo/sampling.hpp"
#include "sayo/sensitivity.hpp"
#include "sayo/store.hpp"

namespace sayo {

struct SessionConfig {
  Eigen::Index n = 10'000;
  double alpha = 0.95;
  int horizon = 1;
  std::uint64_t seed = 0;
  // Rescale sibling weights to sum to one instead of using absolute exposures.
  bool normalize_weights = false;
  bool sensitivity = true;
  int sensitivity_bins = 0;  // 0 picks default_bin_count(n)
  int sensitivity_order = 2;

  void validate() const;
};

struct LeafState {
  std::shared_ptr<const SampleTuple> tuple;
  // Independent driver used as the sensitivity input.
  std::shared_ptr<const Vector> driver;
  std::shared_ptr<const BinnedInput> bins;
  std::uint64_t source_digest = 0;
  // Fingerprint of everything the tuple was generated from.
  std::uint64_t digest = 0;
  bool correlated = false;
};

struct NodeState {
  std::shared_ptr<const Vector> value;  // unweighted node tuple
  double exposure = 1.0;                // product of effective weights up to the root
  std::vector<std::pair<std::string, double>> terms;  // composites: (child, weight) summed
  std::optional<RiskReport> report;                   // on exposure * value
};

struct PortfolioState {
  SessionConfig config;
  std::optional<std::uint64_t> head;
  bool assets_added = false;
  PortfolioTree tree;
  CorrelationPairs pairs;
  std::map<std::string, LeafState> leaves;
  std::map<std::string, NodeState> nodes;
  std::optional<SensitivityReport> sensitivity;
  std::string sensitivity_error;

  const Vector* portfolio() const;
  const RiskReport* root_report() const;
};

// Bit-level equality of everything derived from the model. Report
// timestamps and generation counters are ignored.
bool equivalent(const PortfolioState& a, const PortfolioState& b);

struct PhaseTimes {
  double gt_ms = 0.0;     // random number generation / retrieval
  double st_ms = 0.0;     // aggregation and risk measures
  double ot_ms = 0.0;     // validation, bookkeeping, sensitivity
  double st_ex_ms = 0.0;  // copula synthesis of correlated groups
  double oh_ex_ms = 0.0;  // factorizations for the synthesis
};

struct UpdateNotification {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::add_asset;
  std::optional<RiskReport> portfolio;
  std::map<std::string, RiskReport> nodes;  // reports recomputed by this event
  bool sensitivity_updated = false;
  std::optional<SensitivityReport> sensitivity;
  std::string sensitivity_error;
  std::optional<Divisibility> divisibility;
  std::vector<std::string> regenerated;
  PhaseTimes times;
};

class PortfolioEngine {
 public:
  explicit PortfolioEngine(SessionConfig config, std::shared_ptr<TupleCache> cache = nullptr,
                           std::shared_ptr<const AssetStore> store = nullptr);

  UpdateNotification apply(const SessionEvent& event);

  std::shared_ptr<const PortfolioState> snapshot() const { return state_; }
  const PortfolioState& state() const { return *state_; }

 private:
  std::shared_ptr<const PortfolioState> state_;
  std::shared_ptr<TupleCache> cache_;
  std::shared_ptr<const AssetStore> store_;
};

// Applies every event to the model first and generates once at the end.
std::shared_ptr<const PortfolioState> batch(SessionConfig config, const std::vector<SessionEvent>& events,
                                            std::shared_ptr<TupleCache> cache = nullptr,
                                            std::shared_ptr<const AssetStore> store = nullptr);

// Wire views.
nlohmann::json portfolio_json(const PortfolioState& s);
nlohmann::json risk_json(const PortfolioState& s, bool include_timestamp = true);
nlohmann::json risk_json(const UpdateNotification& u, bool include_timestamp = true);
nlohmann::json sensitivity_json(const PortfolioState& s);
nlohmann::json times_json(const PhaseTimes& t);

}  // namespace sayo
