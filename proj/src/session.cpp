#include "sayo/session.hpp"

#include "sayo/error.hpp"
#include "sayo/json_io.hpp"

namespace sayo {

namespace {
using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}
}  // namespace

LiveSession::LiveSession(std::string id, SessionConfig config, std::shared_ptr<TupleCache> cache,
                         std::shared_ptr<const AssetStore> store)
    : id_(std::move(id)),
      config_(config),
      engine_(config, std::move(cache), std::move(store)),
      opened_(Clock::now()),
      last_intake_(opened_) {
  published_.state = engine_.snapshot();
  worker_ = std::thread([this] { run(); });
}

LiveSession::~LiveSession() {
  {
    std::lock_guard lock(intake_mutex_);
    stopping_ = true;
  }
  intake_cv_.notify_all();
  worker_.join();
}

std::uint64_t LiveSession::submit(SessionEvent event) {
  const auto now = Clock::now();
  {
    std::lock_guard lock(intake_mutex_);
    if (accepted_) {
      require(event.seq > *accepted_, ErrorCode::sequence,
              "event " + std::to_string(event.seq) + " is not after the last accepted event " +
                  std::to_string(*accepted_));
    }
    // The user's time for this event: supplied, or the gap since the previous one.
    const double pt = event.user_time_ms > 0.0 ? event.user_time_ms : ms_between(last_intake_, now);
    accepted_ = event.seq;
    last_intake_ = now;
    queue_.push_back(Pending{std::move(event), pt});
  }
  intake_cv_.notify_all();
  return *accepted_head();
}

std::optional<std::uint64_t> LiveSession::accepted_head() const {
  std::lock_guard lock(intake_mutex_);
  return accepted_;
}

void LiveSession::wait_idle() const {
  std::unique_lock lock(intake_mutex_);
  intake_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

void LiveSession::run() {
  for (;;) {
    Pending next;
    {
      std::unique_lock lock(intake_mutex_);
      intake_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      // Closing a session drops events still waiting in the queue.
      if (stopping_) return;
      next = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
    }
    process(std::move(next));
    {
      std::lock_guard lock(intake_mutex_);
      busy_ = false;
    }
    intake_cv_.notify_all();
  }
}

void LiveSession::process(Pending p) {
  const std::uint64_t seq = p.event.seq;
  UpdateNotification u;
  try {
    u = engine_.apply(p.event);
  } catch (const Error& e) {
    post(seq, "error", {{"code", code_name(e.code())}, {"message", e.detail()}});
    return;
  } catch (const std::exception& e) {
    post(seq, "error", {{"code", "internal"}, {"message", e.what()}});
    return;
  }

  Published next;
  {
    std::lock_guard lock(published_mutex_);
    next.ledger = published_.ledger;
  }
  next.state = engine_.snapshot();
  next.ledger.add_event(seq);
  next.ledger.record_event_timing(seq, Phase::parameterize, p.pt_ms);
  next.ledger.record_event_timing(seq, Phase::generate, u.times.gt_ms);
  next.ledger.record_event_timing(seq, Phase::simulate, u.times.st_ms);
  next.ledger.record_event_timing(seq, Phase::overhead, u.times.ot_ms);
  next.ledger.record_external(u.times.st_ex_ms, u.times.oh_ex_ms);
  next.ledger.set_measured_pipelined(ms_between(opened_, Clock::now()));
  {
    std::lock_guard lock(published_mutex_);
    published_ = std::move(next);
  }

  post(seq, "risk", risk_json(u));
  if (u.sensitivity_updated)
    post(seq, "sensitivity", u.sensitivity ? to_json(*u.sensitivity)
                                           : u.sensitivity_error.empty() ? nlohmann::json(nullptr)
                                                                         : nlohmann::json{{"error", u.sensitivity_error}});
  nlohmann::json timing = times_json(u.times);
  timing["seq"] = seq;
  timing["pt_ms"] = p.pt_ms;
  post(seq, "timing", std::move(timing));
}

void LiveSession::post(std::uint64_t seq, std::string kind, nlohmann::json body) {
  {
    std::lock_guard lock(log_mutex_);
    log_.push_back(UpdateMessage{log_.size(), seq, std::move(kind), std::move(body)});
  }
  log_cv_.notify_all();
}

std::shared_ptr<const PortfolioState> LiveSession::state() const {
  std::lock_guard lock(published_mutex_);
  return published_.state;
}

TimingLedger LiveSession::ledger() const {
  std::lock_guard lock(published_mutex_);
  return published_.ledger;
}

std::optional<Divisibility> LiveSession::divisibility() const {
  const auto s = state();
  if (s->tree.dimensionality() == 0) return std::nullopt;
  return classify_divisibility(s->tree, s->pairs);
}

nlohmann::json LiveSession::snapshot(bool include_timestamps) const {
  Published p;
  {
    std::lock_guard lock(published_mutex_);
    p = published_;
  }
  const PortfolioState& s = *p.state;
  std::optional<Divisibility> kind;
  if (s.tree.dimensionality() > 0) kind = classify_divisibility(s.tree, s.pairs);
  return {{"session", id_},
          {"head", s.head ? nlohmann::json(*s.head) : nlohmann::json(nullptr)},
          {"portfolio", portfolio_json(s)},
          {"risk", risk_json(s, include_timestamps)},
          {"sensitivity", sensitivity_json(s)},
          {"timing", p.ledger.summary(kind)}};
}

std::vector<UpdateMessage> LiveSession::messages(std::size_t from) const {
  std::lock_guard lock(log_mutex_);
  if (from >= log_.size()) return {};
  return {log_.begin() + static_cast<std::ptrdiff_t>(from), log_.end()};
}

std::vector<UpdateMessage> LiveSession::wait_messages(std::size_t from, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(log_mutex_);
  log_cv_.wait_for(lock, timeout, [&] { return log_.size() > from; });
  if (from >= log_.size()) return {};
  return {log_.begin() + static_cast<std::ptrdiff_t>(from), log_.end()};
}

}  // namespace sayo
