#include "sayo/service.hpp"

#include <atomic>
#include <thread>

#include "httplib.h"

#include "sayo/error.hpp"

namespace sayo {

using nlohmann::json;

SessionConfig config_from_json(const json& j, SessionConfig base) {
  require(j.is_object(), ErrorCode::parse, "session config must be a JSON object");
  try {
    if (j.contains("n")) base.n = j.at("n").get<Eigen::Index>();
    if (j.contains("alpha")) base.alpha = j.at("alpha").get<double>();
    if (j.contains("horizon")) base.horizon = j.at("horizon").get<int>();
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("normalize_weights")) base.normalize_weights = j.at("normalize_weights").get<bool>();
    if (j.contains("sensitivity")) base.sensitivity = j.at("sensitivity").get<bool>();
    if (j.contains("sensitivity_bins")) base.sensitivity_bins = j.at("sensitivity_bins").get<int>();
    if (j.contains("sensitivity_order")) base.sensitivity_order = j.at("sensitivity_order").get<int>();
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("bad session config: ") + e.what());
  }
  base.validate();
  return base;
}

json to_json(const SessionConfig& c) {
  return {{"n", c.n},
          {"alpha", c.alpha},
          {"horizon", c.horizon},
          {"seed", c.seed},
          {"normalize_weights", c.normalize_weights},
          {"sensitivity", c.sensitivity},
          {"sensitivity_bins", c.sensitivity_bins},
          {"sensitivity_order", c.sensitivity_order}};
}

std::shared_ptr<LiveSession> SessionRegistry::create(const json& overrides) {
  const SessionConfig config = config_from_json(overrides, options_.defaults);
  std::lock_guard lock(mutex_);
  const std::string id = "s" + std::to_string(next_++);
  auto session = std::make_shared<LiveSession>(id, config, options_.cache, options_.store);
  sessions_.emplace(id, session);
  return session;
}

std::shared_ptr<LiveSession> SessionRegistry::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::vector<std::string> SessionRegistry::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

struct HttpService::Impl {
  explicit Impl(ServiceOptions options) : registry(std::move(options)) {}

  SessionRegistry registry;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  reply(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::sequence: return 409;
    default: return 400;
  }
}

}  // namespace

HttpService::HttpService(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  auto& srv = impl_->server;
  auto* impl = impl_.get();

  auto with_session = [impl](const httplib::Request& req, httplib::Response& res) -> std::shared_ptr<LiveSession> {
    auto s = impl->registry.find(req.matches[1]);
    if (!s) reply_error(res, 404, "not_found", "unknown session '" + std::string(req.matches[1]) + "'");
    return s;
  };

  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"status", "ok"}}); });

  srv.Get("/sessions", [impl](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"sessions", impl->registry.ids()}});
  });

  srv.Post("/sessions", [impl](const httplib::Request& req, httplib::Response& res) {
    try {
      const json body = req.body.empty() ? json::object() : json::parse(req.body);
      auto s = impl->registry.create(body);
      reply(res, 201, {{"session", s->id()}, {"config", to_json(s->config())}});
    } catch (const json::exception& e) {
      reply_error(res, 400, "parse", e.what());
    } catch (const Error& e) {
      reply_error(res, 400, code_name(e.code()), e.detail());
    }
  });

  srv.Post(R"(/sessions/([^/]+)/events)", [with_session](const httplib::Request& req, httplib::Response& res) {
    auto s = with_session(req, res);
    if (!s) return;
    try {
      const json body = json::parse(req.body);
      const std::uint64_t seq = s->submit(event_from_json(body));
      reply(res, 202, {{"session", s->id()}, {"seq", seq}});
    } catch (const json::exception& e) {
      reply_error(res, 400, "parse", e.what());
    } catch (const Error& e) {
      reply_error(res, status_for(e.code()), code_name(e.code()), e.detail());
    }
  });

  auto snapshot = [with_session](const httplib::Request& req, httplib::Response& res) {
    if (auto s = with_session(req, res)) reply(res, 200, s->snapshot());
  };
  srv.Get(R"(/sessions/([^/]+))", snapshot);
  srv.Get(R"(/sessions/([^/]+)/snapshot)", snapshot);

  srv.Get(R"(/sessions/([^/]+)/ledger)", [with_session](const httplib::Request& req, httplib::Response& res) {
    auto s = with_session(req, res);
    if (!s) return;
    if (req.get_param_value("format") == "json")
      reply(res, 200, s->ledger().summary(s->divisibility()));
    else
      res.set_content(s->ledger().to_csv(), "text/csv");
  });

  srv.Get(R"(/sessions/([^/]+)/stream)", [impl, with_session](const httplib::Request& req, httplib::Response& res) {
    auto s = with_session(req, res);
    if (!s) return;
    std::size_t from = 0;
    try {
      if (req.has_param("from")) from = std::stoul(req.get_param_value("from"));
      else if (req.has_header("Last-Event-ID")) from = std::stoul(req.get_header_value("Last-Event-ID")) + 1;
    } catch (const std::exception&) {
      reply_error(res, 400, "parse", "'from' must be a message index");
      return;
    }
    const bool follow = req.get_param_value("follow") != "0";
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [s, from, follow, impl](std::size_t, httplib::DataSink& sink) {
      std::size_t next = from;
      while (!impl->stopping) {
        const auto batch = s->wait_messages(next, std::chrono::milliseconds(100));
        for (const auto& m : batch) {
          const std::string frame = "id: " + std::to_string(m.index) + "\nevent: " + m.kind +
                                    "\ndata: " + m.to_json().dump() + "\n\n";
          if (!sink.write(frame.data(), frame.size())) return false;
          next = m.index + 1;
        }
        if (!follow && batch.empty()) break;
        if (!sink.is_writable()) return false;
      }
      sink.done();
      return true;
    });
  });
}

HttpService::~HttpService() { stop(); }

SessionRegistry& HttpService::sessions() { return impl_->registry; }

int HttpService::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  require(bound > 0, ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpService::serve() { impl_->server.listen_after_bind(); }

int HttpService::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpService::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace sayo
