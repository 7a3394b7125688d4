#pragma once

// Timing accounting for the pipelined session: per-event parameterization
// (pt), generation (gt), simulation (st) and overhead (ot) durations, the
// external synthesis times, measured wall times, and the predicted totals.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sayo/portfolio.hpp"

namespace sayo {

enum class Phase { parameterize, generate, simulate, overhead };

struct EventTiming {
  std::uint64_t seq = 0;
  double pt_ms = 0.0;
  double gt_ms = 0.0;
  double st_ms = 0.0;
  double ot_ms = 0.0;
};

struct TimingTotals {
  double pt_ms = 0.0;
  double gt_ms = 0.0;
  double st_ms = 0.0;
  double ot_ms = 0.0;
  double st_ex_ms = 0.0;
  double oh_ex_ms = 0.0;
};

class TimingLedger {
 public:
  void add_event(std::uint64_t seq);
  bool contains(std::uint64_t seq) const { return events_.count(seq) != 0; }
  // Adds `ms` to the phase of an already registered event.
  void record_event_timing(std::uint64_t seq, Phase phase, double ms);
  void record_external(double st_ex_ms, double oh_ex_ms);
  void set_measured_pipelined(double ms) { pipelined_ms_ = ms; }
  void set_measured_serial(double ms) { serial_ms_ = ms; }

  std::vector<EventTiming> events() const;  // ascending seq
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  TimingTotals totals() const;
  std::optional<double> measured_pipelined() const { return pipelined_ms_; }
  std::optional<double> measured_serial() const { return serial_ms_; }

  // seq,pt_ms,gt_ms,st_ms,ot_ms
  std::string to_csv() const;
  nlohmann::json summary(std::optional<Divisibility> kind = std::nullopt) const;

 private:
  std::map<std::uint64_t, EventTiming> events_;
  double st_ex_ms_ = 0.0;
  double oh_ex_ms_ = 0.0;
  std::optional<double> pipelined_ms_;
  std::optional<double> serial_ms_;
};

// completely_divisible: sum_i max(pt_i, gt_i, st_{i-1} + ot_{i-1}) + st_m + ot_m.
// Otherwise that total plus ST_ex + OH_ex + st_k + ot_k, with k the last event.
double predict_total_time(const TimingLedger& ledger, Divisibility kind);

// One scripted event with configured phase durations (the user's think time
// and the workloads are simulated by sleeping).
struct SyntheticEvent {
  double pt_ms = 0.0;
  double gt_ms = 0.0;
  double st_ms = 0.0;
  double ot_ms = 0.0;
};

// Parameterization of event i+1 overlaps generation and simulation of event
// i. Generation starts when the asset is selected; simulation of i starts
// once its parameterization, its generation and simulation i-1 are done.
TimingLedger run_pipelined(const std::vector<SyntheticEvent>& script);

// Every phase strictly in sequence. Returns the wall time in milliseconds.
double serial_baseline(const std::vector<SyntheticEvent>& script, TimingLedger* ledger = nullptr);

}  // namespace sayo
