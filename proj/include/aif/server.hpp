#pragma once

// HTTP + WebSocket front end for live sessions.
//
//   POST   /session              body: overrides (optional) -> {id, events}
//   DELETE /session/{id}         -> {id, phase}
//   GET    /session/{id}/events  -> {events}
//   GET    /session/{id}/ws      WebSocket: replays the event log, then
//                                accepts {"type":"response","bit":"above"|"below"}
//                                and {"type":"abort"}.
//   GET    /...                  files under static_dir, if set

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/asio/awaitable.hpp>
#include <boost/asio/co_spawn.hpp>
#include <boost/asio/detached.hpp>
#include <boost/asio/use_awaitable.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "aif/error.hpp"
#include "aif/session.hpp"

namespace aif::server {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct ServerConfig {
  std::string host = "127.0.0.1";
  unsigned short port = 8080;
  std::string static_dir;
  std::size_t threads = 4;
  double sweep_seconds = 30.0;
  session::ManagerConfig sessions;
};

inline http::status status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession: return http::status::not_found;
    case ErrorCode::kWrongPhase: return http::status::conflict;
    case ErrorCode::kGone: return http::status::gone;
    case ErrorCode::kCapacity: return http::status::service_unavailable;
    default: return http::status::bad_request;
  }
}

inline nlohmann::json error_json(ErrorCode code, const std::string& msg) {
  return {{"type", "error"}, {"code", std::string(to_string(code))}, {"msg", msg}};
}

/// "above"/"below" or 1/0.
inline bool parse_bit(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j == "above") return true;
    if (j == "below") return false;
  }
  if (j.is_number_integer()) {
    if (j == 1) return true;
    if (j == 0) return false;
  }
  throw Error(ErrorCode::kParseError, "bit must be \"above\", \"below\", 1 or 0");
}

class Server {
 public:
  explicit Server(ServerConfig cfg)
      : cfg_(std::move(cfg)), manager_(cfg_.sessions), acceptor_(ioc_) {
    const tcp::endpoint ep(asio::ip::make_address(cfg_.host), cfg_.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }
  session::SessionManager& sessions() noexcept { return manager_; }

  /// Serves until stop(); blocks the calling thread plus threads - 1 more.
  void run() {
    asio::co_spawn(ioc_, listen(), asio::detached);
    asio::co_spawn(ioc_, sweeper(), asio::detached);
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < cfg_.threads; ++i) pool.emplace_back([this] { ioc_.run(); });
    ioc_.run();
    for (auto& t : pool) t.join();
  }

  void stop() { ioc_.stop(); }

 private:
  asio::awaitable<void> listen() {
    for (;;) {
      auto sock = co_await acceptor_.async_accept(asio::use_awaitable);
      asio::co_spawn(acceptor_.get_executor(), connection(beast::tcp_stream(std::move(sock))), asio::detached);
    }
  }

  asio::awaitable<void> sweeper() {
    asio::steady_timer timer(ioc_);
    for (;;) {
      timer.expires_after(std::chrono::duration_cast<asio::steady_timer::duration>(
          std::chrono::duration<double>(cfg_.sweep_seconds)));
      co_await timer.async_wait(asio::use_awaitable);
      manager_.sweep();
    }
  }

  static std::vector<std::string> split_path(const std::string& target) {
    std::vector<std::string> parts;
    std::stringstream ss(target.substr(0, target.find('?')));
    std::string p;
    while (std::getline(ss, p, '/'))
      if (!p.empty()) parts.push_back(p);
    return parts;
  }

  asio::awaitable<void> connection(beast::tcp_stream stream) {
    beast::flat_buffer buffer;
    try {
      for (;;) {
        http::request<http::string_body> req;
        co_await http::async_read(stream, buffer, req, asio::use_awaitable);
        const auto parts = split_path(std::string(req.target()));
        if (websocket::is_upgrade(req)) {
          if (parts.size() == 3 && parts[0] == "session" && parts[2] == "ws") {
            co_await ws_session(websocket::stream<beast::tcp_stream>(std::move(stream)), std::move(req), parts[1]);
          }
          co_return;
        }
        auto res = handle(req, parts);
        const bool keep = res.keep_alive();
        co_await http::async_write(stream, res, asio::use_awaitable);
        if (!keep) break;
      }
      beast::error_code ec;
      stream.socket().shutdown(tcp::socket::shutdown_send, ec);
    } catch (const std::exception&) {
      // Client went away.
    }
  }

  http::response<http::string_body> reply(const http::request<http::string_body>& req, http::status status,
                                          const nlohmann::json& body) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = body.dump();
    res.prepare_payload();
    return res;
  }

  http::response<http::string_body> handle(const http::request<http::string_body>& req,
                                           const std::vector<std::string>& parts) {
    try {
      if (req.method() == http::verb::post && parts.size() == 1 && parts[0] == "session") {
        nlohmann::json overrides = nullptr;
        if (!req.body().empty()) {
          try {
            overrides = nlohmann::json::parse(req.body());
          } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::kParseError, e.what());
          }
        }
        auto c = manager_.create(overrides);
        return reply(req, http::status::ok, {{"id", c.id}, {"events", c.events}});
      }
      if (req.method() == http::verb::delete_ && parts.size() == 2 && parts[0] == "session") {
        manager_.abort(parts[1]);
        return reply(req, http::status::ok, {{"id", parts[1]}, {"phase", "aborted"}});
      }
      if (req.method() == http::verb::get && parts.size() == 3 && parts[0] == "session" && parts[2] == "events") {
        return reply(req, http::status::ok, {{"events", manager_.events(parts[1])}});
      }
      if (req.method() == http::verb::get && !cfg_.static_dir.empty()) {
        if (auto file = static_file(req)) return *file;
      }
      return reply(req, http::status::not_found, error_json(ErrorCode::kUnknownSession, "no route"));
    } catch (const Error& e) {
      return reply(req, status_for(e.code()), error_json(e.code(), e.what()));
    }
  }

  std::optional<http::response<http::string_body>> static_file(const http::request<http::string_body>& req) {
    std::string rel(req.target().substr(0, req.target().find('?')));
    if (rel.find("..") != std::string::npos) return std::nullopt;
    if (rel.empty() || rel.back() == '/') rel += "index.html";
    const auto path = std::filesystem::path(cfg_.static_dir) / rel.substr(1);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream body;
    body << in.rdbuf();
    http::response<http::string_body> res{http::status::ok, req.version()};
    const auto ext = path.extension().string();
    res.set(http::field::content_type, ext == ".html"  ? "text/html"
                                       : ext == ".js"  ? "text/javascript"
                                       : ext == ".css" ? "text/css"
                                                       : "application/octet-stream");
    res.keep_alive(req.keep_alive());
    res.body() = body.str();
    res.prepare_payload();
    return res;
  }

  asio::awaitable<void> ws_session(websocket::stream<beast::tcp_stream> ws, http::request<http::string_body> req,
                                   std::string id) {
    beast::get_lowest_layer(ws).expires_never();
    ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    co_await ws.async_accept(req, asio::use_awaitable);
    ws.text(true);
    auto send = [&](const nlohmann::json& j) -> asio::awaitable<void> {
      co_await ws.async_write(asio::buffer(j.dump()), asio::use_awaitable);
    };
    try {
      std::size_t sent = 0;
      try {
        for (const auto& e : manager_.events(id)) co_await send(e);
        sent = manager_.events(id, 0).size();
      } catch (const Error& e) {
        co_await send(error_json(e.code(), e.what()));
        co_await ws.async_close(websocket::close_code::normal, asio::use_awaitable);
        co_return;
      }
      beast::flat_buffer buf;
      for (;;) {
        buf.clear();
        co_await ws.async_read(buf, asio::use_awaitable);
        std::vector<nlohmann::json> out;
        try {
          nlohmann::json msg;
          try {
            msg = nlohmann::json::parse(beast::buffers_to_string(buf.data()));
          } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::kParseError, e.what());
          }
          const auto type = msg.value("type", std::string());
          if (type == "response") {
            if (!msg.contains("bit")) throw Error(ErrorCode::kParseError, "response needs a bit");
            manager_.post_response(id, parse_bit(msg["bit"]));
          } else if (type == "abort") {
            manager_.abort(id, msg.value("reason", std::string("client")));
          } else {
            throw Error(ErrorCode::kParseError, "unknown message type '" + type + "'");
          }
          out = manager_.events(id, sent);
          sent += out.size();
        } catch (const Error& e) {
          // Deliver anything produced meanwhile (e.g. a TTL abort) first.
          try {
            out = manager_.events(id, sent);
            sent += out.size();
          } catch (const Error&) {
          }
          out.push_back(error_json(e.code(), e.what()));
        }
        for (const auto& e : out) co_await send(e);
      }
    } catch (const std::exception&) {
      // Closed by the client.
    }
  }

  ServerConfig cfg_;
  session::SessionManager manager_;
  asio::io_context ioc_;
  tcp::acceptor acceptor_;
};

}  // namespace aif::server
