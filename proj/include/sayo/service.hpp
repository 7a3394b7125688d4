#pragma once

// Local HTTP service over live sessions.
//
//   POST /sessions                      create; optional config body
//   POST /sessions/{id}/events          {seq, kind, payload} -> 202 {seq}
//   GET  /sessions/{id}                 snapshot (also /snapshot)
//   GET  /sessions/{id}/stream?from=k   server-sent update messages
//   GET  /sessions/{id}/ledger          CSV, or ?format=json for the summary
//
// 400 malformed body, 404 unknown session, 409 out-of-order sequence number.

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"

#include "sayo/session.hpp"

namespace sayo {

struct ServiceOptions {
  SessionConfig defaults;
  std::shared_ptr<TupleCache> cache;
  std::shared_ptr<const AssetStore> store;
};

// Applies the recognised keys of `j` on top of `base`.
SessionConfig config_from_json(const nlohmann::json& j, SessionConfig base);
nlohmann::json to_json(const SessionConfig& c);

class SessionRegistry {
 public:
  explicit SessionRegistry(ServiceOptions options) : options_(std::move(options)) {}

  std::shared_ptr<LiveSession> create(const nlohmann::json& overrides = nlohmann::json::object());
  std::shared_ptr<LiveSession> find(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
  int next_ = 1;
};

class HttpService {
 public:
  explicit HttpService(ServiceOptions options);
  ~HttpService();

  SessionRegistry& sessions();

  // Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind.
  void serve();
  // bind + serve on a background thread; returns the port once ready.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sayo
