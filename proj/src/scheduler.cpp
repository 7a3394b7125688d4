#include "sayo/scheduler.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "sayo/error.hpp"

namespace sayo {

void TimingLedger::add_event(std::uint64_t seq) {
  require(!events_.count(seq), ErrorCode::parameter, "event " + std::to_string(seq) + " is already in the ledger");
  events_[seq].seq = seq;
}

void TimingLedger::record_event_timing(std::uint64_t seq, Phase phase, double ms) {
  require(ms >= 0.0, ErrorCode::parameter, "durations must be non-negative");
  const auto it = events_.find(seq);
  require(it != events_.end(), ErrorCode::not_found, "no event " + std::to_string(seq) + " in the ledger");
  switch (phase) {
    case Phase::parameterize: it->second.pt_ms += ms; break;
    case Phase::generate: it->second.gt_ms += ms; break;
    case Phase::simulate: it->second.st_ms += ms; break;
    case Phase::overhead: it->second.ot_ms += ms; break;
  }
}

void TimingLedger::record_external(double st_ex_ms, double oh_ex_ms) {
  require(st_ex_ms >= 0.0 && oh_ex_ms >= 0.0, ErrorCode::parameter, "durations must be non-negative");
  st_ex_ms_ += st_ex_ms;
  oh_ex_ms_ += oh_ex_ms;
}

std::vector<EventTiming> TimingLedger::events() const {
  std::vector<EventTiming> out;
  for (const auto& [seq, e] : events_) out.push_back(e);
  return out;
}

TimingTotals TimingLedger::totals() const {
  TimingTotals t;
  for (const auto& [seq, e] : events_) {
    t.pt_ms += e.pt_ms;
    t.gt_ms += e.gt_ms;
    t.st_ms += e.st_ms;
    t.ot_ms += e.ot_ms;
  }
  t.st_ex_ms = st_ex_ms_;
  t.oh_ex_ms = oh_ex_ms_;
  return t;
}

namespace {

std::string shortest(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string TimingLedger::to_csv() const {
  std::string out = "seq,pt_ms,gt_ms,st_ms,ot_ms\n";
  for (const auto& [seq, e] : events_) {
    out += std::to_string(seq) + ',' + shortest(e.pt_ms) + ',' + shortest(e.gt_ms) + ',' + shortest(e.st_ms) + ',' +
           shortest(e.ot_ms) + '\n';
  }
  return out;
}

nlohmann::json TimingLedger::summary(std::optional<Divisibility> kind) const {
  using nlohmann::json;
  const TimingTotals t = totals();
  json out{{"events", events_.size()},
           {"totals",
            {{"PT", t.pt_ms}, {"GT", t.gt_ms}, {"ST", t.st_ms}, {"OH", t.ot_ms}, {"ST_ex", t.st_ex_ms}, {"OH_ex", t.oh_ex_ms}}}};
  json predicted = json::object();
  if (!events_.empty()) {
    predicted["TT_cd"] = predict_total_time(*this, Divisibility::completely_divisible);
    predicted["TT_icd"] = predict_total_time(*this, Divisibility::incompletely_divisible);
    if (kind) predicted["applicable"] = predict_total_time(*this, *kind);
  }
  out["predicted"] = std::move(predicted);
  out["measured"] = {{"pipelined_ms", pipelined_ms_ ? json(*pipelined_ms_) : json(nullptr)},
                     {"serial_ms", serial_ms_ ? json(*serial_ms_) : json(nullptr)}};
  out["divisibility"] = kind ? json(to_string(*kind)) : json(nullptr);
  json records = json::array();
  for (const auto& [seq, e] : events_)
    records.push_back({{"seq", seq}, {"pt_ms", e.pt_ms}, {"gt_ms", e.gt_ms}, {"st_ms", e.st_ms}, {"ot_ms", e.ot_ms}});
  out["records"] = std::move(records);
  return out;
}

double predict_total_time(const TimingLedger& ledger, Divisibility kind) {
  require(!ledger.empty(), ErrorCode::empty, "the timing ledger has no events");
  const auto events = ledger.events();
  double total = 0.0;
  double previous_sim = 0.0;
  for (const auto& e : events) {
    total += std::max({e.pt_ms, e.gt_ms, previous_sim});
    previous_sim = e.st_ms + e.ot_ms;
  }
  total += previous_sim;
  if (kind == Divisibility::completely_divisible) return total;
  const TimingTotals t = ledger.totals();
  return total + t.st_ex_ms + t.oh_ex_ms + events.back().st_ms + events.back().ot_ms;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

// Sleeps for `ms` and returns the measured duration.
double busy(double ms) {
  const auto t0 = Clock::now();
  if (ms > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
  return ms_between(t0, Clock::now());
}

// Index of the last completed stage entry; -1 before the first.
struct Progress {
  std::mutex mutex;
  std::condition_variable changed;
  long selected = -1;
  long parameterized = -1;
  long generated = -1;

  void advance(long Progress::*field, long i) {
    {
      std::lock_guard lock(mutex);
      this->*field = i;
    }
    changed.notify_all();
  }
  void wait(long Progress::*field, long i) {
    std::unique_lock lock(mutex);
    changed.wait(lock, [&] { return this->*field >= i; });
  }
};

}  // namespace

TimingLedger run_pipelined(const std::vector<SyntheticEvent>& script) {
  TimingLedger ledger;
  const auto m = static_cast<long>(script.size());
  for (long i = 0; i < m; ++i) ledger.add_event(static_cast<std::uint64_t>(i + 1));
  std::vector<EventTiming> measured(script.size());
  Progress progress;

  const auto start = Clock::now();
  std::thread generator([&] {
    for (long i = 0; i < m; ++i) {
      progress.wait(&Progress::selected, i);
      measured[static_cast<std::size_t>(i)].gt_ms = busy(script[static_cast<std::size_t>(i)].gt_ms);
      progress.advance(&Progress::generated, i);
    }
  });
  std::thread simulator([&] {
    for (long i = 0; i < m; ++i) {
      progress.wait(&Progress::parameterized, i);
      progress.wait(&Progress::generated, i);
      auto& e = measured[static_cast<std::size_t>(i)];
      e.st_ms = busy(script[static_cast<std::size_t>(i)].st_ms);
      e.ot_ms = busy(script[static_cast<std::size_t>(i)].ot_ms);
    }
  });
  for (long i = 0; i < m; ++i) {
    progress.advance(&Progress::selected, i);
    measured[static_cast<std::size_t>(i)].pt_ms = busy(script[static_cast<std::size_t>(i)].pt_ms);
    progress.advance(&Progress::parameterized, i);
  }
  generator.join();
  simulator.join();
  const double wall = ms_between(start, Clock::now());

  for (long i = 0; i < m; ++i) {
    const auto seq = static_cast<std::uint64_t>(i + 1);
    const auto& e = measured[static_cast<std::size_t>(i)];
    ledger.record_event_timing(seq, Phase::parameterize, e.pt_ms);
    ledger.record_event_timing(seq, Phase::generate, e.gt_ms);
    ledger.record_event_timing(seq, Phase::simulate, e.st_ms);
    ledger.record_event_timing(seq, Phase::overhead, e.ot_ms);
  }
  ledger.set_measured_pipelined(wall);
  return ledger;
}

double serial_baseline(const std::vector<SyntheticEvent>& script, TimingLedger* ledger) {
  const auto start = Clock::now();
  for (const auto& e : script) {
    busy(e.pt_ms);
    busy(e.gt_ms);
    busy(e.st_ms);
    busy(e.ot_ms);
  }
  const double wall = ms_between(start, Clock::now());
  if (ledger) ledger->set_measured_serial(wall);
  return wall;
}

}  // namespace sayo
