#pragma once

// A live session: events are accepted immediately and applied in sequence
// by a background worker, so generation and simulation of one event overlap
// the user supplying the next. Every accepted event yields one "risk" or one
// "error" message on the session's update log; "sensitivity" and "timing"
// messages accompany successful updates.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "sayo/engine.hpp"
#include "sayo/scheduler.hpp"

namespace sayo {

struct UpdateMessage {
  std::size_t index = 0;  // position in the session's log
  std::uint64_t seq = 0;
  std::string kind;       // risk, sensitivity, timing or error
  nlohmann::json body;

  nlohmann::json to_json() const { return {{"seq", seq}, {"kind", kind}, {"body", body}}; }
};

class LiveSession {
 public:
  LiveSession(std::string id, SessionConfig config, std::shared_ptr<TupleCache> cache = nullptr,
              std::shared_ptr<const AssetStore> store = nullptr);
  ~LiveSession();
  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return config_; }

  // Queues the event and returns its sequence number. A sequence number not
  // above the last accepted one raises a sequence error.
  std::uint64_t submit(SessionEvent event);
  std::optional<std::uint64_t> accepted_head() const;

  // Blocks until every accepted event has been processed.
  void wait_idle() const;

  // Parts taken from one published state; never waits for the worker.
  nlohmann::json snapshot(bool include_timestamps = true) const;
  std::shared_ptr<const PortfolioState> state() const;
  TimingLedger ledger() const;
  std::optional<Divisibility> divisibility() const;

  std::vector<UpdateMessage> messages(std::size_t from = 0) const;
  // Waits up to `timeout` for messages at or after `from`.
  std::vector<UpdateMessage> wait_messages(std::size_t from, std::chrono::milliseconds timeout) const;

 private:
  struct Pending {
    SessionEvent event;
    double pt_ms = 0.0;
  };
  struct Published {
    std::shared_ptr<const PortfolioState> state;
    TimingLedger ledger;
  };

  void run();
  void process(Pending p);
  void post(std::uint64_t seq, std::string kind, nlohmann::json body);

  std::string id_;
  SessionConfig config_;
  PortfolioEngine engine_;
  std::chrono::steady_clock::time_point opened_;

  mutable std::mutex intake_mutex_;
  mutable std::condition_variable intake_cv_;
  std::deque<Pending> queue_;
  std::optional<std::uint64_t> accepted_;
  std::chrono::steady_clock::time_point last_intake_;
  bool busy_ = false;
  bool stopping_ = false;

  mutable std::mutex published_mutex_;
  Published published_;

  mutable std::mutex log_mutex_;
  mutable std::condition_variable log_cv_;
  std::vector<UpdateMessage> log_;

  std::thread worker_;
};

}  // namespace sayo
